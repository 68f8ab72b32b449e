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

// capsyolo: command-line front end over the C API.

#include <CLI11.hpp>
#include <csignal>
#include <cstdio>
#include <thread>

#include "cli_common.hpp"
#include "server/http_server.hpp"

using namespace capsyolo::cli;

namespace {

void print_epoch(const cy_epoch_record* r, void*)
{
    std::fprintf(stderr, "epoch %3zu  train_loss %.6f  val_loss %.6f  train_acc %.4f  val_acc %.4f\n", r->epoch,
                 r->train_loss, r->val_loss, r->train_acc, r->val_acc);
}

int serve(const std::string& config, const std::string& overrides)
{
    cy_diagnoser* d = nullptr;
    cy_status st = cy_diagnoser_open(config.empty() ? nullptr : config.c_str(),
                                     overrides.empty() ? nullptr : overrides.c_str(), &d);
    if (st != CY_OK) return fail(st, "startup");

    Owned host;
    int port = 0;
    std::size_t max_upload = 0;
    st = cy_diagnoser_listen(d, &host.p, &port, &max_upload);
    if (st != CY_OK) {
        cy_diagnoser_free(d);
        return fail(st, "startup");
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    int rc = 0;
    {
        capsyolo::server::DiagnosisServer server(d, max_upload);
        const int bound = server.bind(host.str(), port);
        if (bound < 0) {
            std::fprintf(stderr, "startup: cannot bind %s:%d\n", host.p, port);
            rc = static_cast<int>(CY_ERR_IO);
        } else {
            std::fprintf(stderr, "listening on %s:%d\n", host.p, bound);
            std::thread worker([&] { server.serve(); });
            int sig = 0;
            sigwait(&signals, &sig);
            server.stop();
            worker.join();
        }
    }
    cy_diagnoser_free(d);
    return rc;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Capsule network with a YOLO-style detection head"};
    app.require_subcommand(1);

    std::string data, config, model_path, history;
    auto* train = app.add_subcommand("train", "fit a model on a container's train split");
    train->add_option("--data", data, "training container")->required()->check(CLI::ExistingFile);
    train->add_option("--config", config, "model.* / train.* / loss.* settings")->check(CLI::ExistingFile);
    train->add_option("-o,--out", model_path, "model output path")->required();
    train->add_option("--history", history, "per-epoch history CSV");
    bool quiet = false;
    train->add_flag("-q,--quiet", quiet, "no per-epoch lines");

    std::string split = "test", metrics_out, cm_out;
    auto* evaluate = app.add_subcommand("evaluate", "accuracy, per-class and macro metrics");
    evaluate->add_option("--data", data)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--split", split)->check(CLI::IsMember({"train", "test", "all"}))->capture_default_str();
    evaluate->add_option("--metrics", metrics_out, "write metrics JSON here instead of stdout");
    evaluate->add_option("--confusion", cm_out, "confusion matrix CSV");

    std::string csv, plot;
    auto* plot_history = app.add_subcommand("plot-history", "loss and accuracy curves as SVG");
    plot_history->add_option("history", csv)->required()->check(CLI::ExistingFile);
    plot_history->add_option("-o,--out", plot)->required();

    auto* info = app.add_subcommand("info", "model version, classes and configuration");
    info->add_option("model", model_path)->required();

    std::vector<std::string> sets;
    auto* srv = app.add_subcommand("serve", "HTTP diagnosis service");
    srv->add_option("--config", config, "service.* settings")->check(CLI::ExistingFile);
    srv->add_option("--set", sets, "override a key, e.g. service.port=9000");

    CLI11_PARSE(app, argc, argv);

    if (*train) {
        Owned summary;
        const cy_status st = cy_train(data.c_str(), config.empty() ? nullptr : config.c_str(), model_path.c_str(),
                                      history.empty() ? nullptr : history.c_str(), quiet ? nullptr : print_epoch,
                                      nullptr, &summary.p);
        if (st != CY_OK) return fail(st, "train");
        std::printf("%s\n", summary.p);
        return 0;
    }
    if (*evaluate) {
        Owned metrics, cm;
        const cy_status st = cy_evaluate(data.c_str(), model_path.c_str(), split.c_str(), &metrics.p,
                                         cm_out.empty() ? nullptr : &cm.p);
        if (st != CY_OK) return fail(st, "evaluate");
        if (!cm_out.empty() && !write_text(cm_out, cm.str())) return static_cast<int>(CY_ERR_IO);
        if (metrics_out.empty()) {
            std::printf("%s\n", metrics.p);
            return 0;
        }
        return write_text(metrics_out, metrics.str()) ? 0 : static_cast<int>(CY_ERR_IO);
    }
    if (*plot_history) {
        Owned svg;
        const cy_status st = cy_plot_history(csv.c_str(), &svg.p);
        if (st != CY_OK) return fail(st, "plot-history");
        return write_text(plot, svg.str()) ? 0 : static_cast<int>(CY_ERR_IO);
    }
    if (*info) {
        cy_model* m = nullptr;
        cy_status st = cy_model_load(model_path.c_str(), &m);
        if (st != CY_OK) return fail(st, "info");
        Owned text;
        st = cy_model_info(m, &text.p);
        cy_model_free(m);
        if (st != CY_OK) return fail(st, "info");
        std::printf("%s\n", text.p);
        return 0;
    }
    std::string overrides;
    for (const auto& s : sets) overrides += s + "\n";
    return serve(config, overrides);
}
