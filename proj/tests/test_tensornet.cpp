#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <unistd.h>

#include "graspsight/tensornet.hpp"

using namespace gs::tensornet;
using gs::Rng;

namespace {

// Small double-precision net builders used as gradient-check subjects. Each
// returns the loss and runs backward when asked.
using DTape = Tape<double>;
using DTensor = TensorT<double>;

DTensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  DTensor t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::current_path() /
           ("gs_test_tmp_" + std::to_string(uint64_t(::getpid())) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE_BEGIN("tensornet");

TEST_CASE("elementwise op values") {
  Tape<float> t;
  auto x = t.input(Tensor({4}, {-1.0f, 0.0f, 2.0f, -0.5f}));
  auto r = t.relu(x);
  CHECK(t.value(r)[0] == 0.0f);
  CHECK(t.value(r)[2] == 2.0f);

  auto s = t.sigmoid(t.input(Tensor({1}, {0.0f})));
  CHECK(t.value(s)[0] == doctest::Approx(0.5f));

  auto tiled = t.tile_vector_to_channels(t.input(Tensor({1, 2}, {3.0f, 7.0f})), 2, 2);
  CHECK(t.value(tiled).shape == std::vector<int>{1, 2, 2, 2});
  for (int i = 0; i < 4; ++i) {
    CHECK(t.value(tiled)[i] == 3.0f);
    CHECK(t.value(tiled)[4 + i] == 7.0f);
  }
}

TEST_CASE("conv2d identity kernel and shape formula") {
  Tape<float> t;
  Rng rng(3);
  Tensor x({1, 1, 4, 4});
  for (auto& v : x.data) v = float(rng.uniform());
  // 1x1 kernel with weight 1, bias 0 reproduces the input
  auto y = t.conv2d(t.input(x), t.input(Tensor({1, 1, 1, 1}, {1.0f})),
                    t.input(Tensor({1}, {0.0f})), 1, 0);
  for (int64_t i = 0; i < 16; ++i) CHECK(t.value(y)[i] == doctest::Approx(x[i]));

  // 3x3, pad 1, stride 1 preserves spatial dims
  auto w = t.input(Tensor({5, 1, 3, 3}));
  auto y2 = t.conv2d(t.input(x), w, t.input(Tensor({5})), 1, 1);
  CHECK(t.value(y2).shape == std::vector<int>{1, 5, 4, 4});
}

TEST_CASE("conv2d output shape obeys (H+2p-k)/s+1 over random valid configs") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    int k = 1 + 2 * int(rng.uniform_int(2));  // 1 or 3
    int s = 1 + int(rng.uniform_int(2));      // 1 or 2
    int p = int(rng.uniform_int(2));
    int oh = 1 + int(rng.uniform_int(6));
    int h = s * (oh - 1) + k - 2 * p;  // construct a valid input size
    if (h < 1) continue;
    int c = 1 + int(rng.uniform_int(3));
    int f = 1 + int(rng.uniform_int(4));
    Tape<float> t;
    auto y = t.conv2d(t.input(Tensor({2, c, h, h})), t.input(Tensor({f, c, k, k})),
                      t.input(Tensor({f})), s, p);
    CHECK(t.value(y).shape == std::vector<int>{2, f, oh, oh});
  }
}

TEST_CASE("conv2d rejects bad geometry with a descriptive error") {
  Tape<float> t;
  auto x = t.input(Tensor({1, 2, 5, 5}));
  CHECK_THROWS_WITH_AS(
      t.conv2d(x, t.input(Tensor({4, 3, 3, 3})), t.input(Tensor({4})), 1, 1),
      doctest::Contains("channels"), gs::shape_error);
  CHECK_THROWS_AS(t.conv2d(x, t.input(Tensor({4, 2, 3, 3})), t.input(Tensor({4})), 2, 0),
                  gs::shape_error);
}

TEST_CASE("loss values: bce at p=0.5 is ln 2, mse of equal inputs is 0") {
  Tape<float> t;
  auto p = t.input(Tensor({3, 1}, {0.5f, 0.5f, 0.5f}));
  auto l = t.bce_loss(p, Tensor({3, 1}, {1.0f, 0.0f, 1.0f}));
  CHECK(t.value(l)[0] == doctest::Approx(std::log(2.0f)).epsilon(1e-6));

  auto a = t.input(Tensor({4}, {0.3f, -2.0f, 5.0f, 0.0f}));
  auto m = t.mse_loss(a, a);
  CHECK(t.value(m)[0] == 0.0f);
}

TEST_CASE("backward on sum gives all-ones; repeat after zero_grad is identical") {
  ParamTable params;
  auto& p = params.add("x", Tensor({2, 3}));
  Rng rng(5);
  for (auto& v : p.value.data) v = float(rng.uniform());

  for (int rep = 0; rep < 2; ++rep) {
    params.zero_grad();
    Tape<float> t;
    auto loss = t.sum(t.param(params.at("x")));
    t.backward(loss);
    for (int64_t i = 0; i < params.at("x").grad.size(); ++i)
      CHECK(params.at("x").grad[i] == 1.0f);
  }
  (void)p;
}

TEST_CASE("backward without a recorded forward is an explicit error") {
  Tape<float> t;
  CHECK_THROWS_AS(t.backward(0), std::logic_error);
}

TEST_CASE("gradient check: every layer type") {
  // >= 20 random seeds/shapes across the layer zoo, double precision.
  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 24; ++seed) {
    Rng rng(seed);
    ParamTableT<double> params;
    int variant = int(seed % 6);
    int h = 4 + 2 * int(seed % 3);  // 4, 6, 8

    if (variant == 0) {  // conv + relu
      params.add("w", random_tensor({3, 2, 3, 3}, rng, 0.5));
      params.add("b", random_tensor({3}, rng, 0.1));
      DTensor x = random_tensor({1, 2, h, h}, rng);
      DTensor y = random_tensor({1, 3, h, h}, rng);
      auto build = [&](bool back) {
        DTape t;
        auto out = t.relu(t.conv2d(t.input(x), t.param(params.at("w")),
                                   t.param(params.at("b")), 1, 1));
        auto loss = t.mse_loss(out, t.input(y));
        double lv = t.value(loss)[0];
        if (back) t.backward(loss);
        return lv;
      };
      worst = std::max(worst, grad_check(params, build));
    } else if (variant == 1) {  // dense + sigmoid + bce
      params.add("w", random_tensor({3, 5}, rng, 0.5));
      params.add("b", random_tensor({3}, rng, 0.1));
      DTensor x = random_tensor({2, 5}, rng);
      DTensor lab({2, 3}, {1, 0, 1, 0, 1, 0});
      auto build = [&](bool back) {
        DTape t;
        auto out = t.sigmoid(t.dense(t.input(x), t.param(params.at("w")),
                                     t.param(params.at("b"))));
        auto loss = t.bce_loss(out, lab);
        double lv = t.value(loss)[0];
        if (back) t.backward(loss);
        return lv;
      };
      worst = std::max(worst, grad_check(params, build));
    } else if (variant == 2) {  // maxpool
      params.add("w", random_tensor({2, 1, 3, 3}, rng, 0.5));
      params.add("b", random_tensor({2}, rng, 0.1));
      DTensor x = random_tensor({1, 1, h, h}, rng);
      DTensor y = random_tensor({1, 2, h / 2, h / 2}, rng);
      auto build = [&](bool back) {
        DTape t;
        auto out = t.maxpool2x2(
            t.conv2d(t.input(x), t.param(params.at("w")), t.param(params.at("b")), 1, 1));
        auto loss = t.mse_loss(out, t.input(y));
        double lv = t.value(loss)[0];
        if (back) t.backward(loss);
        return lv;
      };
      worst = std::max(worst, grad_check(params, build));
    } else if (variant == 3) {  // upsample + concat
      params.add("w", random_tensor({2, 3, 3, 3}, rng, 0.5));
      params.add("b", random_tensor({2}, rng, 0.1));
      params.add("seed_map", random_tensor({1, 2, 3, 3}, rng));
      DTensor extra = random_tensor({1, 1, 6, 6}, rng);
      DTensor y = random_tensor({1, 2, 6, 6}, rng);
      auto build = [&](bool back) {
        DTape t;
        auto up = t.upsample2x(t.param(params.at("seed_map")));
        auto cat = t.concat_channels(up, t.input(extra));
        auto out =
            t.conv2d(cat, t.param(params.at("w")), t.param(params.at("b")), 1, 1);
        auto loss = t.mse_loss(out, t.input(y));
        double lv = t.value(loss)[0];
        if (back) t.backward(loss);
        return lv;
      };
      worst = std::max(worst, grad_check(params, build));
    } else if (variant == 4) {  // tile + slice + compositing arithmetic
      params.add("v", random_tensor({1, 2}, rng));
      params.add("mask_seed", random_tensor({1, 1, 4, 4}, rng));
      DTensor base = random_tensor({1, 1, 4, 4}, rng);
      DTensor y = random_tensor({1, 1, 4, 4}, rng);
      auto build = [&](bool back) {
        DTape t;
        auto planes = t.tile_vector_to_channels(t.param(params.at("v")), 4, 4);
        auto g0 = t.slice_channel(planes, 0);
        auto mask = t.sigmoid(t.param(params.at("mask_seed")));
        auto blend =
            t.add(t.mul(mask, t.input(base)), t.mul(t.one_minus(mask), g0));
        auto loss = t.mse_loss(blend, t.input(y));
        double lv = t.value(loss)[0];
        if (back) t.backward(loss);
        return lv;
      };
      worst = std::max(worst, grad_check(params, build));
    } else {  // conv block + flatten + dense chain
      params.add("w1", random_tensor({4, 2, 3, 3}, rng, 0.5));
      params.add("b1", random_tensor({4}, rng, 0.1));
      params.add("w2", random_tensor({2, 4 * (h / 2) * (h / 2)}, rng, 0.3));
      params.add("b2", random_tensor({2}, rng, 0.1));
      DTensor x = random_tensor({1, 2, h, h}, rng);
      DTensor lab({1, 2}, {1, 0});
      auto build = [&](bool back) {
        DTape t;
        auto c = t.maxpool2x2(t.relu(
            t.conv2d(t.input(x), t.param(params.at("w1")), t.param(params.at("b1")), 1, 1)));
        auto out = t.sigmoid(
            t.dense(t.flatten(c), t.param(params.at("w2")), t.param(params.at("b2"))));
        auto loss = t.bce_loss(out, lab);
        double lv = t.value(loss)[0];
        if (back) t.backward(loss);
        return lv;
      };
      worst = std::max(worst, grad_check(params, build));
    }
    CHECK(worst < 1e-4);
  }
  MESSAGE("worst relative gradient error: " << worst);
}

TEST_CASE("gradient check: composite conv-relu-pool-dense-sigmoid-bce net") {
  Rng rng(99);
  ParamTableT<double> params;
  params.add("c1/w", random_tensor({4, 1, 3, 3}, rng, 0.5));
  params.add("c1/b", random_tensor({4}, rng, 0.1));
  params.add("d1/w", random_tensor({8, 4 * 4 * 4}, rng, 0.3));
  params.add("d1/b", random_tensor({8}, rng, 0.1));
  params.add("head/w", random_tensor({1, 8}, rng, 0.5));
  params.add("head/b", random_tensor({1}, rng, 0.1));
  DTensor x = random_tensor({2, 1, 8, 8}, rng);
  DTensor lab({2, 1}, {1, 0});
  auto build = [&](bool back) {
    DTape t;
    auto c = t.maxpool2x2(t.relu(
        t.conv2d(t.input(x), t.param(params.at("c1/w")), t.param(params.at("c1/b")), 1, 1)));
    auto d = t.relu(t.dense(t.flatten(c), t.param(params.at("d1/w")),
                            t.param(params.at("d1/b"))));
    auto out = t.sigmoid(t.dense(d, t.param(params.at("head/w")),
                                 t.param(params.at("head/b"))));
    auto loss = t.bce_loss(out, lab);
    double lv = t.value(loss)[0];
    if (back) t.backward(loss);
    return lv;
  };
  CHECK(grad_check(params, build) < 1e-4);
}

TEST_CASE("gradient check detects a corrupted gradient (negative control)") {
  Rng rng(7);
  ParamTableT<double> params;
  params.add("w", random_tensor({3, 4}, rng, 0.5));
  params.add("b", random_tensor({3}, rng, 0.1));
  DTensor x = random_tensor({2, 4}, rng);
  DTensor y = random_tensor({2, 3}, rng);
  auto build = [&](bool back) {
    DTape t;
    auto out = t.dense(t.input(x), t.param(params.at("w")), t.param(params.at("b")));
    auto loss = t.mse_loss(out, t.input(y));
    double lv = t.value(loss)[0];
    if (back) {
      t.backward(loss);
      params.at("w").grad[0] += 0.5;  // deliberate corruption
    }
    return lv;
  };
  CHECK(grad_check(params, build) > 1e-2);
}

TEST_CASE("identity network gradient is exact") {
  ParamTableT<double> params;
  params.add("x", DTensor({5}, {0.3, -0.7, 1.1, 0.0, 2.5}));
  auto build = [&](bool back) {
    DTape t;
    auto loss = t.sum(t.param(params.at("x")));
    double lv = t.value(loss)[0];
    if (back) t.backward(loss);
    return lv;
  };
  CHECK(grad_check(params, build) < 1e-9);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParamTable params;
  params.add("w", Tensor({3}, {1.0f, -2.0f, 0.5f}));
  AdamState st;
  st.bind(params);
  params.zero_grad();
  adam_step(params, st);
  CHECK(params.at("w").value[0] == 1.0f);
  CHECK(params.at("w").value[1] == -2.0f);
  CHECK(params.at("w").value[2] == 0.5f);
  CHECK(st.step == 1);
}

TEST_CASE("adam: first step moves by about lr against the gradient") {
  ParamTable params;
  params.add("w", Tensor({1}, {0.0f}));
  AdamState st;
  st.bind(params);
  params.at("w").grad[0] = 3.7f;
  adam_step(params, st);
  float moved = params.at("w").value[0];
  CHECK(moved < 0.0f);
  CHECK(std::fabs(moved) <= st.lr);
  CHECK(std::fabs(moved) == doctest::Approx(st.lr).epsilon(1e-4));
}

TEST_CASE("adam: 200 steps on (w-3)^2 converge near 3") {
  ParamTable params;
  params.add("w", Tensor({1}, {0.0f}));
  AdamState st;
  st.lr = 0.05f;
  st.bind(params);
  for (int i = 0; i < 200; ++i) {
    params.zero_grad();
    params.at("w").grad[0] = 2.0f * (params.at("w").value[0] - 3.0f);
    adam_step(params, st);
  }
  CHECK(std::fabs(params.at("w").value[0] - 3.0f) < 0.1f);
}

TEST_CASE("sigmoid output range and loss positivity") {
  Rng rng(11);
  Tape<float> t;
  Tensor x({64});
  for (auto& v : x.data) v = float(rng.uniform(-50.0, 50.0));
  auto s = t.sigmoid(t.input(x));
  for (int64_t i = 0; i < 64; ++i) {
    CHECK(t.value(s)[i] > 0.0f);
    CHECK(t.value(s)[i] < 1.0f);
  }
  Tensor y({64});
  for (auto& v : y.data) v = float(rng.uniform());
  auto m = t.mse_loss(t.input(x), t.input(y));
  CHECK(t.value(m)[0] >= 0.0f);
}

TEST_CASE("checkpoint roundtrip is bit-exact") {
  TempDir dir;
  Rng rng(21);
  std::vector<NamedTensor> tensors;
  tensors.push_back({"conv1/w", Tensor({4, 2, 3, 3})});
  tensors.push_back({"conv1/b", Tensor({4})});
  tensors.push_back({"meta/arch/test", Tensor({1}, {64.0f})});
  for (auto& nt : tensors)
    for (auto& v : nt.tensor.data) v = float(rng.uniform(-1.0, 1.0));

  save_checkpoint(tensors, dir.file("a.ckpt"));
  auto back = load_checkpoint(dir.file("a.ckpt"));
  REQUIRE(back.size() == tensors.size());
  for (size_t i = 0; i < tensors.size(); ++i) {
    CHECK(back[i].name == tensors[i].name);
    CHECK(back[i].tensor.shape == tensors[i].tensor.shape);
    CHECK(std::memcmp(back[i].tensor.ptr(), tensors[i].tensor.ptr(),
                      sizeof(float) * size_t(back[i].tensor.size())) == 0);
  }
}

TEST_CASE("empty checkpoint is header-only") {
  TempDir dir;
  save_checkpoint({}, dir.file("empty.ckpt"));
  CHECK(std::filesystem::file_size(dir.file("empty.ckpt")) == 12);  // magic+version+count
  CHECK(load_checkpoint(dir.file("empty.ckpt")).empty());
}

TEST_CASE("checkpoint errors are distinct: magic, version, truncation") {
  TempDir dir;
  save_checkpoint({{"x", Tensor({2}, {1.0f, 2.0f})}}, dir.file("ok.ckpt"));

  {
    auto bytes = dir.file("bad_magic.ckpt");
    std::FILE* f = std::fopen(bytes.c_str(), "wb");
    std::fwrite("XXXX", 1, 4, f);
    uint32_t v = 1, c = 0;
    std::fwrite(&v, 4, 1, f);
    std::fwrite(&c, 4, 1, f);
    std::fclose(f);
    CHECK_THROWS_WITH_AS(load_checkpoint(bytes), doctest::Contains("magic"), gs::io_error);
  }
  {
    auto bytes = dir.file("bad_version.ckpt");
    std::FILE* f = std::fopen(bytes.c_str(), "wb");
    std::fwrite("GSPT", 1, 4, f);
    uint32_t v = 9, c = 0;
    std::fwrite(&v, 4, 1, f);
    std::fwrite(&c, 4, 1, f);
    std::fclose(f);
    CHECK_THROWS_WITH_AS(load_checkpoint(bytes), doctest::Contains("version"), gs::io_error);
  }
  {
    // drop the last 4 bytes of a valid file
    auto all = dir.file("ok.ckpt");
    auto cut = dir.file("truncated.ckpt");
    std::FILE* in = std::fopen(all.c_str(), "rb");
    std::fseek(in, 0, SEEK_END);
    long n = std::ftell(in);
    std::fseek(in, 0, SEEK_SET);
    std::vector<char> buf(size_t(n - 4));
    REQUIRE(std::fread(buf.data(), 1, buf.size(), in) == buf.size());
    std::fclose(in);
    std::FILE* out = std::fopen(cut.c_str(), "wb");
    std::fwrite(buf.data(), 1, buf.size(), out);
    std::fclose(out);
    CHECK_THROWS_WITH_AS(load_checkpoint(cut), doctest::Contains("truncated"), gs::io_error);
  }
}

TEST_SUITE_END();
