#include "screenorder/error.hpp"
#include "screenorder/prompting.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace screenorder {

namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                      std::chrono::milliseconds timeout) override {
        const std::size_t scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            throw Error(ErrorKind::Config, "endpoint must be an absolute http(s) URL: " + url);
        }
        const std::size_t path_start = url.find('/', scheme_end + 3);
        const std::string origin = url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
        client.set_connection_timeout(seconds.count(), micros.count());
        client.set_read_timeout(seconds.count(), micros.count());
        client.set_write_timeout(seconds.count(), micros.count());

        httplib::Headers h;
        std::string content_type = "application/json";
        for (const auto& [name, value] : headers) {
            if (name == "Content-Type") {
                content_type = value;
            } else {
                h.emplace(name, value);
            }
        }
        auto result = client.Post(path, h, body, content_type);
        if (!result) {
            const auto err = result.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
                throw Error(ErrorKind::Timeout, "request to " + origin + " timed out");
            }
            throw Error(ErrorKind::BackendError, "request to " + origin + " failed: " + httplib::to_string(err));
        }
        return {result->status, result->body};
    }
};

} // namespace

std::unique_ptr<HttpTransport> make_http_transport() {
    return std::make_unique<HttplibTransport>();
}

} // namespace screenorder
