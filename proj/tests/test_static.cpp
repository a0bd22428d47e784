#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dvsgait/frames.hpp"
#include "dvsgait/static_stream.hpp"

using namespace dvsgait;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dvsgait_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

StaticStreamConfig tiny_config() {
  StaticStreamConfig cfg;
  cfg.in_channels = 2;
  cfg.input_size = 16;
  cfg.c1 = 3;
  cfg.c2 = 4;
  cfg.c3 = 5;
  cfg.embed_dim = 4;
  cfg.teacher_dim = 3;
  return cfg;
}

}  // namespace

TEST_CASE("grayscale", "[static]") {
  SECTION("pure white maps to 1, pure red to 0.299") {
    Tensor rgb({3, 1, 1});
    rgb.fill(1.0);
    CHECK(grayscale(rgb)[0] == Catch::Approx(1.0).margin(1e-12));
    rgb.zero();
    rgb.at(0, 0, 0) = 1.0;
    CHECK(grayscale(rgb)[0] == Catch::Approx(0.299).margin(1e-15));
  }

  SECTION("random frame matches the scalar loop") {
    Rng rng(31);
    Tensor rgb({3, 4, 6});
    rgb.fill_uniform(rng, 0.0, 1.0);
    Tensor g = grayscale(rgb);
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        const double ref =
            0.299 * rgb.at(0, y, x) + 0.587 * rgb.at(1, y, x) + 0.114 * rgb.at(2, y, x);
        REQUIRE(g.at(y, x) == Catch::Approx(ref).margin(1e-12));
      }
  }

  SECTION("wrong channel count rejected") {
    Tensor bad({2, 2, 2});
    CHECK_THROWS_AS(grayscale(bad), Error);
  }
}

TEST_CASE("static encoder: contracts", "[static]") {
  StaticStreamConfig cfg = tiny_config();
  StaticEncoder enc(cfg);
  Rng rng(37);
  enc.init_weights(rng);

  SECTION("zero input response is deterministic") {
    Tensor zero({2, 16, 16});
    StaticEncoder::Record r1, r2;
    auto a = enc.forward(zero, r1);
    auto b = enc.forward(zero, r2);
    for (std::size_t i = 0; i < a.embedding.size(); ++i)
      REQUIRE(a.embedding[i] == b.embedding[i]);
    for (std::size_t i = 0; i < a.aligned.size(); ++i) REQUIRE(a.aligned[i] == b.aligned[i]);
  }

  SECTION("output widths follow the configuration") {
    Tensor x({2, 16, 16});
    x.fill_uniform(rng, 0.0, 1.0);
    StaticEncoder::Record rec;
    auto out = enc.forward(x, rec);
    CHECK(out.embedding.size() == 4);
    CHECK(out.aligned.size() == 3);
  }

  SECTION("an 8 px shift changes the embedding") {
    Tensor x({2, 16, 16});
    x.fill_uniform(rng, 0.0, 1.0);
    Tensor shifted({2, 16, 16});
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t xx = 0; xx < 16; ++xx)
          shifted.at(c, y, (xx + 8) % 16) = x.at(c, y, xx);
    StaticEncoder::Record r1, r2;
    auto a = enc.forward(x, r1);
    auto b = enc.forward(shifted, r2);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.embedding.size(); ++i)
      if (a.embedding[i] != b.embedding[i]) any_diff = true;
    CHECK(any_diff);
  }

  SECTION("shape mismatch rejected") {
    Tensor bad({3, 16, 16});
    StaticEncoder::Record rec;
    CHECK_THROWS_AS(enc.forward(bad, rec), Error);
  }
}

TEST_CASE("static encoder: gradients match central finite differences", "[static]") {
  StaticStreamConfig cfg = tiny_config();
  StaticEncoder enc(cfg);
  Rng rng(41);
  enc.init_weights(rng);

  Tensor x({2, 16, 16});
  x.fill_uniform(rng, 0.0, 1.0);
  Tensor probe_e({cfg.embed_dim});
  probe_e.fill_uniform(rng, -1.0, 1.0);
  Tensor probe_a({cfg.teacher_dim});
  probe_a.fill_uniform(rng, -1.0, 1.0);

  auto loss = [&]() {
    StaticEncoder::Record rec;
    auto out = enc.forward(x, rec);
    double l = 0.0;
    for (std::size_t i = 0; i < out.embedding.size(); ++i) l += probe_e[i] * out.embedding[i];
    for (std::size_t i = 0; i < out.aligned.size(); ++i) l += probe_a[i] * out.aligned[i];
    return l;
  };

  ParamList params;
  enc.collect(params, "static");
  for (auto& p : params) p.grad->zero();
  StaticEncoder::Record rec;
  enc.forward(x, rec);
  enc.backward(probe_e, probe_a, rec);

  const double h = 1e-6;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.value->size(); i += 7) {  // sampled stride keeps it quick
      const double keep = (*p.value)[i];
      (*p.value)[i] = keep + h;
      const double lp = loss();
      (*p.value)[i] = keep - h;
      const double lm = loss();
      (*p.value)[i] = keep;
      const double fd = (lp - lm) / (2.0 * h);
      INFO(p.name << "[" << i << "]");
      REQUIRE((*p.grad)[i] == Catch::Approx(fd).margin(1e-6));
    }
  }
}

TEST_CASE("align_loss", "[static]") {
  SECTION("zero for equal vectors, one for unit offset") {
    Rng rng(1);
    Tensor a({4});
    a.fill_uniform(rng, 0.0, 1.0);
    CHECK(align_loss(a, a) == 0.0);
    Tensor z({4}), e({4});
    e[2] = 1.0;
    CHECK(align_loss(z, e) == 1.0);
  }

  SECTION("random pair matches the scalar sum") {
    Rng rng(43);
    Tensor a({8}), b({8});
    a.fill_uniform(rng, -1.0, 1.0);
    b.fill_uniform(rng, -1.0, 1.0);
    double ref = 0.0;
    for (std::size_t i = 0; i < 8; ++i) ref += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(align_loss(a, b) == Catch::Approx(ref).margin(1e-12));
  }

  SECTION("gradient is 2 (z_evs - z_img), and matches finite differences") {
    Rng rng(47);
    Tensor a({6}), b({6});
    a.fill_uniform(rng, -1.0, 1.0);
    b.fill_uniform(rng, -1.0, 1.0);
    Tensor g = align_loss_grad(a, b);
    for (std::size_t i = 0; i < 6; ++i) {
      REQUIRE(g[i] == 2.0 * (a[i] - b[i]));
      const double h = 1e-6;
      Tensor ap = a;
      ap[i] += h;
      Tensor am = a;
      am[i] -= h;
      const double fd = (align_loss(ap, b) - align_loss(am, b)) / (2.0 * h);
      REQUIRE(g[i] == Catch::Approx(fd).epsilon(1e-6));
    }
  }

  SECTION("width mismatch rejected") {
    Tensor a({3}), b({4});
    CHECK_THROWS_AS(align_loss(a, b), Error);
  }
}

TEST_CASE("pseudo teacher", "[static]") {
  Tensor frame({64, 64});
  Rng rng(53);
  frame.fill_uniform(rng, 0.0, 1.0);

  SECTION("deterministic per seed") {
    Tensor a = pseudo_teacher(frame, 16, 99);
    Tensor b = pseudo_teacher(frame, 16, 99);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
  }

  SECTION("zero frame maps to the zero vector") {
    Tensor zero({64, 64});
    Tensor z = pseudo_teacher(zero, 16, 99);
    for (std::size_t i = 0; i < z.size(); ++i) REQUIRE(z[i] == 0.0);
  }

  SECTION("distinct frames map to distinct vectors") {
    Tensor other({64, 64});
    other.fill_uniform(rng, 0.0, 1.0);
    Tensor a = pseudo_teacher(frame, 16, 99);
    Tensor b = pseudo_teacher(other, 16, 99);
    bool diff = false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] != b[i]) diff = true;
    CHECK(diff);
  }
}

TEST_CASE("teacher feature file round trip and validation", "[static]") {
  TeacherFeatureSet set;
  set.dim = 5;
  set.teacher_name = "pseudo";
  Rng rng(59);
  for (const char* id : {"a_01", "b_02", "c_03"}) {
    Tensor v({5});
    v.fill_uniform(rng, -1.0, 1.0);
    set.features[id] = v;
  }
  const auto path = tmp_path("teacher.tfs1");
  write_teacher_features(set, path.string());
  TeacherFeatureSet back = load_teacher_features(path.string());
  REQUIRE(back.dim == 5);
  REQUIRE(back.features.size() == 3);
  for (const auto& [id, vec] : set.features) {
    const Tensor& r = back.get(id);
    for (std::size_t i = 0; i < 5; ++i)
      REQUIRE(r[i] == Catch::Approx(vec[i]).margin(1e-6));  // f32 payload
  }

  SECTION("unknown sample id is a data error") {
    CHECK_THROWS_AS(back.get("nope"), Error);
  }

  SECTION("short final vector names the sample id") {
    // truncate the file mid-vector
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
    out.close();
    try {
      load_teacher_features(path.string());
      FAIL("expected data error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("c_03") != std::string::npos);
    }
  }
}
