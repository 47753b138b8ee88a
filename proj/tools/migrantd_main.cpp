// Copyright 2026 The Migrant Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>

#include <sys/resource.h>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "migrant/net/node.hpp"

using namespace migrant;

namespace {

void raise_fd_limit() {
    rlimit lim{};
    if (::getrlimit(RLIMIT_NOFILE, &lim) == 0 && lim.rlim_cur < lim.rlim_max) {
        lim.rlim_cur = lim.rlim_max;
        ::setrlimit(RLIMIT_NOFILE, &lim);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"migrant broker"};
    std::string config_path;
    std::vector<std::string> overrides;
    bool rejoin = false;
    app.add_option("config", config_path, "key=value config file")->required();
    app.add_option("--set", overrides, "extra key=value line, applied after the file");
    app.add_flag("--rejoin", rejoin, "rebuild state from peers (restart after a crash)");
    CLI11_PARSE(app, argc, argv);

    net::NodeConfig cfg;
    try {
        std::string text;
        {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot read " + config_path);
            text.assign(std::istreambuf_iterator<char>(in), {});
        }
        for (const auto& o : overrides) text += "\n" + o;
        cfg = net::NodeConfig::from(KeyValueConfig(text));
    } catch (const std::exception& e) {
        std::cerr << "migrantd: " << e.what() << "\n";
        return 2;
    }
    if (rejoin) cfg.cluster.restarted = true;
    spdlog::set_level(spdlog::level::from_str(cfg.log_level));
    raise_fd_limit();

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    try {
        net::ServerNode node(cfg);
        node.start();
        std::printf("ready client_port=%u peer_port=%u\n", node.client_port(), node.peer_port());
        std::fflush(stdout);
        int sig = 0;
        sigwait(&set, &sig);
        spdlog::info("signal {}, shutting down", sig);
        node.stop();
    } catch (const std::exception& e) {
        std::cerr << "migrantd: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
