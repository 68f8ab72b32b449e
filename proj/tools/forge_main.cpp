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

// forge: builds and inspects training containers.

#include <CLI11.hpp>
#include <cstdio>

#include "cli_common.hpp"

using namespace capsyolo::cli;

int main(int argc, char** argv)
{
    CLI::App app{"Merge labelled image trees into a balanced, split training container"};
    app.require_subcommand(1);

    std::string sources, targets, out, manifest;
    std::uint64_t seed = 42;
    double train_fraction = 0.8;
    std::size_t image_size = 64;
    auto* build = app.add_subcommand("build", "scan sources, balance per-class targets, split and write");
    build->add_option("--sources", sources, "comma-separated source roots (root/<class>/<image>)")->required();
    build->add_option("--targets", targets, "per-class target counts (class = count)")->required()->check(CLI::ExistingFile);
    build->add_option("-o,--out", out, "output container path")->required();
    build->add_option("--manifest", manifest, "also write the selection manifest as JSON");
    build->add_option("--seed", seed, "sampling and split seed")->capture_default_str();
    build->add_option("--train-fraction", train_fraction)->capture_default_str();
    build->add_option("--image-size", image_size, "square side in pixels")->capture_default_str();

    std::string container;
    double ratio_bound = 2.0;
    auto* validate = app.add_subcommand("validate", "report class balance; exit 1 when out of bounds");
    validate->add_option("container", container)->required();
    validate->add_option("--ratio-bound", ratio_bound, "largest allowed max/min class ratio")->capture_default_str();

    std::string plot;
    auto* stats = app.add_subcommand("stats", "per-class counts as SVG");
    stats->add_option("container", container)->required();
    stats->add_option("--plot", plot, "output SVG path")->required();

    CLI11_PARSE(app, argc, argv);

    if (*build) {
        Owned report;
        const cy_status st = cy_forge_build(sources.c_str(), targets.c_str(), out.c_str(),
                                            manifest.empty() ? nullptr : manifest.c_str(), seed, train_fraction,
                                            image_size, &report.p);
        if (st != CY_OK) return fail(st, "build");
        std::printf("%s\n", report.p);
        return 0;
    }
    if (*validate) {
        Owned report;
        int ok = 0;
        const cy_status st = cy_container_validate(container.c_str(), ratio_bound, &report.p, &ok);
        if (st != CY_OK) return fail(st, "validate");
        std::printf("%s\n", report.p);
        return ok ? 0 : 1;
    }
    Owned svg;
    const cy_status st = cy_container_stats_svg(container.c_str(), &svg.p);
    if (st != CY_OK) return fail(st, "stats");
    return write_text(plot, svg.str()) ? 0 : static_cast<int>(CY_ERR_IO);
}
