#include "recbench/textprep.hpp"

#include <httplib.h>
#include <json.hpp>

#include "recbench/error.hpp"

namespace recbench::textprep {

HttpSynopsisProvider::HttpSynopsisProvider(std::string host, int port, std::string path,
                                           std::string model, std::string api_key)
    : host_(std::move(host)),
      port_(port),
      path_(std::move(path)),
      model_(std::move(model)),
      api_key_(std::move(api_key)) {}

std::string HttpSynopsisProvider::generate(const PromptPair& prompt) {
    httplib::Client client(host_, port_);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const nlohmann::json body{
        {"model", model_},
        {"messages",
         {{{"role", "system"}, {"content", prompt.system}},
          {{"role", "user"}, {"content", prompt.user}}}},
        {"temperature", 0.0},
    };
    const auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        throw Error("http provider: no response from " + host_ + ":" + std::to_string(port_));
    }
    if (res->status != 200) {
        throw Error("http provider: status " + std::to_string(res->status) + " from " + host_);
    }
    const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw Error("http provider: response is not JSON");
    try {
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw Error("http provider: unexpected response shape");
    }
}

}  // namespace recbench::textprep
