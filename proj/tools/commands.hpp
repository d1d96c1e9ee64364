#pragma once

#include <cstdint>

#include <CLI11.hpp>

struct GlobalFlags {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool quiet = false;
};

void register_commands(CLI::App& app, GlobalFlags& flags);
