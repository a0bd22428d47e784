#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "dvsgait/event.hpp"
#include "dvsgait/event_io.hpp"
#include "dvsgait/rng.hpp"
#include "dvsgait/voxel.hpp"

using namespace dvsgait;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dvsgait_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

EventStream random_stream(std::uint64_t seed, std::size_t count, std::uint16_t w,
                          std::uint16_t h, std::uint64_t t_start, std::uint64_t duration,
                          bool interior_only = false) {
  Rng rng(seed);
  std::vector<Event> events;
  for (std::size_t i = 0; i < count; ++i) {
    Event e;
    e.x = static_cast<std::uint16_t>(rng.below(w));
    e.y = static_cast<std::uint16_t>(rng.below(h));
    if (interior_only) {
      // keep every event at least one full bin width away from the edges
      e.t = t_start + duration / 8 + rng.below(duration - duration / 4);
    } else {
      e.t = t_start + rng.below(duration + 1);
    }
    e.p = rng.coin() ? 1 : -1;
    events.push_back(e);
  }
  std::stable_sort(events.begin(), events.end(), canonical_event_order);
  return EventStream(std::move(events), w, h, t_start, duration);
}

// Scalar reference: evaluate the kernel for every (event, bin) pair.
VoxelGrid brute_force_voxelize(const EventStream& s, std::size_t k_bins) {
  const double dt = static_cast<double>(s.duration()) / static_cast<double>(k_bins);
  VoxelGrid g = make_zero_grid(k_bins, s.height(), s.width(), dt, s.t_start());
  for (const Event& e : s.events()) {
    for (std::size_t k = 0; k < k_bins; ++k) {
      const double t_k = static_cast<double>(s.t_start()) + (static_cast<double>(k) + 0.5) * dt;
      const double w = std::max(0.0, 1.0 - std::abs(static_cast<double>(e.t) - t_k) / dt);
      g.at(e.p > 0 ? 0 : 1, k, e.y, e.x) += w;
    }
  }
  return g;
}

}  // namespace

TEST_CASE("voxelize: kernel peak and symmetry", "[event_core]") {
  // window [0, 8000], K = 8 -> dT = 1000, centers at 500 + 1000 k
  std::vector<Event> events{{2, 1, 2500, 1}};
  EventStream s(std::move(events), 4, 4, 0, 8000);
  VoxelGrid g = voxelize(s, 8);

  SECTION("event at a bin center deposits weight 1 there, 0 at neighbours") {
    CHECK(g.at(0, 2, 1, 2) == 1.0);
    CHECK(g.at(0, 1, 1, 2) == 0.0);
    CHECK(g.at(0, 3, 1, 2) == 0.0);
    CHECK(g.mass() == 1.0);
  }

  SECTION("event midway between centers splits 0.5 / 0.5") {
    EventStream mid({{0, 0, 3000, -1}}, 4, 4, 0, 8000);
    VoxelGrid gm = voxelize(mid, 8);
    CHECK(gm.at(1, 2, 0, 0) == Catch::Approx(0.5).margin(1e-12));
    CHECK(gm.at(1, 3, 0, 0) == Catch::Approx(0.5).margin(1e-12));
  }
}

TEST_CASE("voxelize: brute-force per-(event,bin) oracle", "[event_core]") {
  EventStream s = random_stream(41, 100, 6, 5, 1000, 16000);
  VoxelGrid g = voxelize(s, 8);
  VoxelGrid ref = brute_force_voxelize(s, 8);
  REQUIRE(g.data.size() == ref.data.size());
  for (std::size_t i = 0; i < g.data.size(); ++i)
    REQUIRE(g.data[i] == Catch::Approx(ref.data[i]).margin(1e-9));
  CHECK(g.mass() == Catch::Approx(ref.mass()).margin(1e-9));
}

TEST_CASE("voxelize: mass conservation for interior events", "[event_core]") {
  for (std::uint64_t seed : {1, 2, 3}) {
    EventStream s = random_stream(seed, 100, 8, 8, 0, 80000, /*interior_only=*/true);
    VoxelGrid g = voxelize(s, 8);
    CHECK(g.mass() == Catch::Approx(100.0).margin(1e-9));
  }
}

TEST_CASE("voxelize: polarity separation", "[event_core]") {
  EventStream s = random_stream(7, 200, 8, 8, 0, 50000);
  VoxelGrid g = voxelize(s, 4);
  double pos_ref = 0.0, neg_ref = 0.0;
  VoxelGrid ref = brute_force_voxelize(s, 4);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        pos_ref += ref.at(0, k, y, x);
        neg_ref += ref.at(1, k, y, x);
      }
  double pos = 0.0, neg = 0.0;
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        pos += g.at(0, k, y, x);
        neg += g.at(1, k, y, x);
      }
  CHECK(pos == Catch::Approx(pos_ref).margin(1e-9));
  CHECK(neg == Catch::Approx(neg_ref).margin(1e-9));
}

TEST_CASE("voxelize: permutation invariance of tie ordering", "[event_core]") {
  // same timestamp, different stored order: deposition re-sorts, so the
  // result is identical bit for bit
  std::vector<Event> a{{0, 0, 100, 1}, {1, 0, 500, 1}, {0, 1, 500, -1}, {1, 1, 500, 1}};
  std::vector<Event> b{{0, 0, 100, 1}, {1, 1, 500, 1}, {1, 0, 500, 1}, {0, 1, 500, -1}};
  EventStream sa(std::move(a), 2, 2, 0, 1000);
  EventStream sb(std::move(b), 2, 2, 0, 1000);
  VoxelGrid ga = voxelize(sa, 4);
  VoxelGrid gb = voxelize(sb, 4);
  for (std::size_t i = 0; i < ga.data.size(); ++i) REQUIRE(ga.data[i] == gb.data[i]);
}

TEST_CASE("voxelize: error paths", "[event_core]") {
  EventStream s = random_stream(3, 10, 4, 4, 0, 1000);
  CHECK_THROWS_AS(voxelize(s, 0), Error);
  EventStream zero_window({}, 4, 4, 0, 0);
  CHECK_THROWS_AS(voxelize(zero_window, 4), Error);
}

TEST_CASE("two_scale_split: degenerate single slice equals static grid", "[event_core]") {
  EventStream s = random_stream(11, 64, 6, 6, 2000, 24000);
  TwoScaleSlices ts = two_scale_split(s, 1, 8, 8);
  REQUIRE(ts.dynamic.size() == 1);
  for (std::size_t i = 0; i < ts.static_grid.data.size(); ++i)
    REQUIRE(ts.dynamic[0].data[i] == ts.static_grid.data[i]);
}

TEST_CASE("two_scale_split: mass accounting against one fine voxelization", "[event_core]") {
  // divisible window: slice bins coincide with the fine grid's bins
  EventStream s = random_stream(13, 150, 6, 6, 0, 48000);
  const std::size_t n_slices = 4, k_dyn = 3;
  TwoScaleSlices ts = two_scale_split(s, n_slices, k_dyn, 8);
  VoxelGrid fine = voxelize(s, n_slices * k_dyn);
  double split_mass = 0.0;
  for (const auto& g : ts.dynamic) split_mass += g.mass();
  CHECK(split_mass == Catch::Approx(fine.mass()).margin(1e-9));
}

TEST_CASE("two_scale_split: windows tile exactly and empty stream is all zero",
          "[event_core]") {
  EventStream s = random_stream(17, 32, 4, 4, 500, 10007);  // remainder case
  TwoScaleSlices ts = two_scale_split(s, 3, 2, 4);
  REQUIRE(ts.dynamic.size() == 3);
  std::uint64_t cursor = s.t_start();
  for (std::size_t i = 0; i < ts.dynamic.size(); ++i) {
    CHECK(ts.dynamic[i].origin_us == cursor);
    const double len = ts.dynamic[i].delta_t_us * static_cast<double>(ts.dynamic[i].bins());
    cursor += static_cast<std::uint64_t>(std::llround(len));
  }
  CHECK(cursor == s.t_end());

  EventStream empty({}, 4, 4, 0, 9000);
  TwoScaleSlices zs = two_scale_split(empty, 3, 2, 4);
  for (const auto& g : zs.dynamic) CHECK(g.mass() == 0.0);
  CHECK(zs.static_grid.mass() == 0.0);
}

TEST_CASE("crop_grid", "[event_core]") {
  EventStream s = random_stream(19, 120, 8, 8, 0, 20000);
  VoxelGrid g = voxelize(s, 4);

  SECTION("full extent is identity") {
    VoxelGrid c = crop_grid(g, Rect{0, 0, 8, 8});
    for (std::size_t i = 0; i < g.data.size(); ++i) REQUIRE(c.data[i] == g.data[i]);
  }

  SECTION("left half keeps exactly the left-half mass") {
    VoxelGrid c = crop_grid(g, Rect{0, 0, 4, 8});
    double expected = 0.0;
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t y = 0; y < 8; ++y)
          for (std::size_t x = 0; x < 4; ++x) expected += g.at(p, k, y, x);
    CHECK(c.mass() == Catch::Approx(expected).margin(1e-12));
    CHECK(c.width() == 4);
  }

  SECTION("1x1 bbox keeps one pixel column of values") {
    VoxelGrid c = crop_grid(g, Rect{3, 2, 1, 1});
    REQUIRE(c.width() == 1);
    REQUIRE(c.height() == 1);
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t k = 0; k < 4; ++k) REQUIRE(c.at(p, k, 0, 0) == g.at(p, k, 2, 3));
  }

  SECTION("empty intersection is an error") {
    CHECK_THROWS_AS(crop_grid(g, Rect{-8, 0, 4, 4}), Error);
  }
}

TEST_CASE("pad_and_resize", "[event_core]") {
  SECTION("64x64 input is untouched") {
    VoxelGrid g = make_zero_grid(2, 64, 64, 100.0, 0);
    Rng rng(5);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = rng.uniform();
    VoxelGrid r = pad_and_resize(g, 64);
    for (std::size_t i = 0; i < g.data.size(); ++i) REQUIRE(r.data[i] == g.data[i]);
  }

  SECTION("constant 32x64 plane stays constant over the mapped interior") {
    VoxelGrid g = make_zero_grid(1, 32, 64, 100.0, 0);
    g.data.fill(0.75);
    VoxelGrid r = pad_and_resize(g, 64);
    // pad 32 -> 64 puts the content in rows 16..47; identity resample keeps it
    for (std::size_t y = 17; y < 47; ++y)
      for (std::size_t x = 0; x < 64; ++x) REQUIRE(r.at(0, 0, y, x) == Catch::Approx(0.75));
  }

  SECTION("matches an independent reference bilinear resampler") {
    VoxelGrid g = make_zero_grid(1, 16, 16, 100.0, 0);
    Rng rng(6);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = rng.uniform();
    VoxelGrid r = pad_and_resize(g, 32);
    // reference: same half-pixel convention, written independently
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t ty = 0; ty < 32; ++ty)
        for (std::size_t tx = 0; tx < 32; ++tx) {
          const double sy = (static_cast<double>(ty) + 0.5) * 0.5 - 0.5;
          const double sx = (static_cast<double>(tx) + 0.5) * 0.5 - 0.5;
          const long fy0 = static_cast<long>(std::floor(sy));
          const long fx0 = static_cast<long>(std::floor(sx));
          const double fy = sy - static_cast<double>(fy0);
          const double fx = sx - static_cast<double>(fx0);
          const long y0 = std::clamp(fy0, 0L, 15L), y1 = std::clamp(fy0 + 1, 0L, 15L);
          const long x0 = std::clamp(fx0, 0L, 15L), x1 = std::clamp(fx0 + 1, 0L, 15L);
          const double v =
              (1 - fy) * ((1 - fx) * g.at(p, 0, y0, x0) + fx * g.at(p, 0, y0, x1)) +
              fy * ((1 - fx) * g.at(p, 0, y1, x0) + fx * g.at(p, 0, y1, x1));
          REQUIRE(r.at(p, 0, ty, tx) == Catch::Approx(v).margin(1e-12));
        }
  }

  SECTION("all-zero grid maps to all-zero output") {
    VoxelGrid g = make_zero_grid(3, 20, 40, 10.0, 0);
    VoxelGrid r = pad_and_resize(g, 64);
    CHECK(r.mass() == 0.0);
    CHECK(r.height() == 64);
    CHECK(r.width() == 64);
  }
}

TEST_CASE("event io: EVS1 round trip is bit exact", "[event_core]") {
  std::vector<Event> events{{1, 2, 100, 1}, {3, 0, 250, -1}, {1, 2, 900, 1}};
  EventStream s(std::move(events), 5, 4, 50, 1000);
  const auto path = tmp_path("roundtrip.evs1");
  write_events(s, path.string());
  EventStream r = read_events(path.string());
  REQUIRE(r.size() == 3);
  CHECK(r.width() == 5);
  CHECK(r.height() == 4);
  CHECK(r.t_start() == 50);
  CHECK(r.duration() == 1000);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.events()[i].x == s.events()[i].x);
    CHECK(r.events()[i].y == s.events()[i].y);
    CHECK(r.events()[i].t == s.events()[i].t);
    CHECK(r.events()[i].p == s.events()[i].p);
  }
}

TEST_CASE("event io: malformed files are rejected with offsets", "[event_core]") {
  std::vector<Event> events{{0, 0, 100, 1}, {1, 1, 200, -1}, {2, 2, 300, 1}};
  EventStream s(std::move(events), 4, 4, 0, 1000);
  const auto path = tmp_path("broken.evs1");
  write_events(s, path.string());

  auto patch = [&](std::uint64_t offset, char value) {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(static_cast<std::streamoff>(offset));
    f.put(value);
  };

  SECTION("polarity byte 0") {
    patch(32 + 16 + 12, 0);  // record 1's p byte
    try {
      read_events(path.string());
      FAIL("expected format error");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset() == 32 + 16 + 12);
    }
  }

  SECTION("decreasing timestamp names the record") {
    patch(32 + 2 * 16 + 4 + 1, 0);  // record 2's t second byte: 300 -> 44 < 200
    try {
      read_events(path.string());
      FAIL("expected format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("record 2") != std::string::npos);
    }
  }

  SECTION("bad magic") {
    patch(0, 'X');
    CHECK_THROWS_AS(read_events(path.string()), FormatError);
  }
}

TEST_CASE("event io: CSV mode", "[event_core]") {
  std::vector<Event> events{{1, 2, 100, 1}, {3, 0, 250, -1}};
  EventStream s(std::move(events), 5, 4, 50, 1000);
  const auto path = tmp_path("roundtrip.csv");
  write_events(s, path.string());
  EventStream r = read_events(path.string());
  REQUIRE(r.size() == 2);
  CHECK(r.width() == 5);
  CHECK(r.t_start() == 50);
  CHECK(r.events()[1].p == -1);

  SECTION("polarity 0 rejected") {
    std::ofstream f(path, std::ios::trunc);
    f << "x,y,t,p\n1,1,10,0\n";
    f.close();
    CHECK_THROWS_AS(read_events(path.string()), FormatError);
  }
}
