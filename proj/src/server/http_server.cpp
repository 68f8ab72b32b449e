// Copyright 2026 The capsyolo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "server/http_server.hpp"

#include <httplib.h>
#include <json.hpp>

namespace capsyolo::server {

namespace {

// Multipart framing around the image part.
constexpr std::size_t kEnvelopeSlack = 64 * 1024;

struct CString {
    char* p = nullptr;
    ~CString() { cy_string_free(p); }
};

void send_json(httplib::Response& res, int status, const std::string& body)
{
    res.status = status;
    res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message)
{
    send_json(res, status, nlohmann::json{{"error", code}, {"message", message}}.dump());
}

int http_status(cy_status st, const std::string& reason)
{
    if (st == CY_ERR_BAD_INPUT) return reason == "upload_too_large" ? 413 : 400;
    return 500;
}

}  // namespace

struct DiagnosisServer::Impl {
    const cy_diagnoser* diagnoser;
    std::size_t max_upload;
    httplib::Server http;
};

DiagnosisServer::DiagnosisServer(const cy_diagnoser* diagnoser, std::size_t max_upload_bytes)
    : impl_(std::make_unique<Impl>())
{
    impl_->diagnoser = diagnoser;
    impl_->max_upload = max_upload_bytes;
    auto& http = impl_->http;
    http.set_payload_max_length(max_upload_bytes + kEnvelopeSlack);
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    http.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        CString out;
        const cy_status st = cy_diagnoser_health(impl_->diagnoser, &out.p);
        if (st != CY_OK) return send_error(res, 500, cy_status_name(st), cy_last_error());
        send_json(res, 200, out.p);
    });

    http.Post("/diagnose", [this](const httplib::Request& req, httplib::Response& res) {
        if (!req.is_multipart_form_data())
            return send_error(res, 400, "not_multipart", "expected multipart/form-data with an 'image' field");
        if (!req.has_file("image")) return send_error(res, 400, "missing_image", "form field 'image' is required");
        const auto part = req.get_file_value("image");
        CString out;
        const cy_status st = cy_diagnoser_diagnose(
            impl_->diagnoser, reinterpret_cast<const std::uint8_t*>(part.content.data()), part.content.size(), &out.p);
        if (st != CY_OK) {
            const std::string reason = cy_last_error_reason();
            return send_error(res, http_status(st, reason), reason.empty() ? cy_status_name(st) : reason,
                              cy_last_error());
        }
        send_json(res, 200, out.p);
    });

    http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 413) return send_error(res, 413, "upload_too_large", "request body exceeds the upload limit");
        if (res.status == 404) return send_error(res, 404, "not_found", "no such endpoint");
        send_error(res, res.status, "http_error", "request failed");
    });
}

DiagnosisServer::~DiagnosisServer()
{
    stop();
}

int DiagnosisServer::bind(const std::string& host, int port)
{
    if (port == 0) return impl_->http.bind_to_any_port(host);
    return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool DiagnosisServer::serve()
{
    return impl_->http.listen_after_bind();
}

void DiagnosisServer::stop()
{
    if (impl_->http.is_running()) impl_->http.stop();
}

void DiagnosisServer::wait_until_ready() const
{
    impl_->http.wait_until_ready();
}

}  // namespace capsyolo::server
