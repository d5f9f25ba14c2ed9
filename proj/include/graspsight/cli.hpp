#pragma once

// Subcommand bodies behind the `graspsight` binary. Split out so unit tests
// can call them in-process. Exit codes: 0 ok, 2 usage/config, 3 I/O or
// missing input, 4 numeric failure.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace gs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

struct CommonOptions {
  std::string config_path;  // empty: all defaults
  bool json = false;
};

struct GenOptions {
  CommonOptions common;
  std::string out_dir;
  std::optional<int64_t> count;
  std::optional<uint64_t> seed;
  std::optional<int> image_size;
};

struct TrainOptions {
  CommonOptions common;
  std::string task;  // model-free | surrogate | predictive
  std::string data_dir;
  std::string out_ckpt;
};

struct EvalOptions {
  CommonOptions common;
  std::string ckpt_path;
  std::string data_dir;
  std::string split;  // train | val
};

struct CompareOptions {
  CommonOptions common;
  std::string data_dir;
  std::string out_dir;
};

struct RenderOptions {
  CommonOptions common;
  std::string ckpt_path;
  std::string data_dir;
  int n = 4;
  std::string out_path;
};

int cmd_gen(const GenOptions& opt);
int cmd_train(const TrainOptions& opt);
int cmd_eval(const EvalOptions& opt);
int cmd_compare(const CompareOptions& opt);
int cmd_render(const RenderOptions& opt);

// Maps the error taxonomy onto exit codes and prints the message to stderr.
int run_guarded(const std::function<int()>& body);

}  // namespace gs::cli
