#include <fstream>
#include <map>
#include <set>

#include "colactc/ctc.hpp"
#include "colactc/data.hpp"
#include "doctest.h"

using namespace colactc;

namespace {
TaskSpec small_spec() {
  TaskSpec spec;
  spec.v_src = 16;
  spec.v_tgt = 16;
  spec.f_dim = 4;
  spec.len_min = 2;
  spec.len_max = 5;
  spec.expand_min = 2;
  spec.expand_max = 3;
  spec.noise_sigma = 0.1;
  spec.swap_prob = 0.2;
  spec.seed = 3;
  return spec;
}
}  // namespace

TEST_CASE("degenerate generator repeats exact prototypes") {
  TaskSpec spec = small_spec();
  spec.noise_sigma = 0.0;
  spec.expand_min = spec.expand_max = 2;
  auto data = generate(spec, 20);
  for (const auto& t : data) {
    CHECK(t.frames.rows() == 2 * static_cast<Eigen::Index>(t.transcript_ids.size()));
    for (Eigen::Index r = 0; r + 1 < t.frames.rows(); r += 2) {
      CHECK((t.frames.row(r) - t.frames.row(r + 1)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  // identical source tokens share identical prototypes across items
  std::map<int, Eigen::RowVectorXd> proto;
  for (const auto& t : data) {
    for (size_t j = 0; j < t.transcript_ids.size(); ++j) {
      auto row = t.frames.row(2 * static_cast<Eigen::Index>(j));
      auto [it, inserted] = proto.try_emplace(t.transcript_ids[j], row);
      if (!inserted) CHECK((it->second - row).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("swap_prob zero keeps the token-wise bijection") {
  TaskSpec spec = small_spec();
  spec.swap_prob = 0.0;
  auto data = generate(spec, 50);
  std::map<int, int> mapping;
  std::set<int> images;
  for (const auto& t : data) {
    REQUIRE(t.translation_ids.size() == t.transcript_ids.size());
    for (size_t j = 0; j < t.transcript_ids.size(); ++j) {
      auto [it, inserted] =
          mapping.try_emplace(t.transcript_ids[j], t.translation_ids[j]);
      if (!inserted) CHECK(it->second == t.translation_ids[j]);
    }
  }
  for (const auto& [src, tgt] : mapping) {
    CHECK(images.insert(tgt).second);  // injective
  }
}

TEST_CASE("same seed reproduces the dataset exactly") {
  TaskSpec spec = small_spec();
  auto a = generate(spec, 30);
  auto b = generate(spec, 30);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].transcript_ids == b[i].transcript_ids);
    CHECK(a[i].translation_ids == b[i].translation_ids);
    CHECK((a[i].frames - b[i].frames).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("jsonl round trip is stable at stored precision") {
  auto data = generate(small_spec(), 25);
  const std::string p1 = "/tmp/colactc_data_rt1.jsonl";
  const std::string p2 = "/tmp/colactc_data_rt2.jsonl";
  write_jsonl(p1, data);
  auto loaded = read_jsonl(p1);
  REQUIRE(loaded.size() == data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    CHECK(loaded[i].transcript_ids == data[i].transcript_ids);
    CHECK(loaded[i].translation_ids == data[i].translation_ids);
    double rel = (loaded[i].frames - data[i].frames).cwiseAbs().maxCoeff();
    CHECK(rel <= 1e-4);
  }
  // write(read(x)) is byte-stable: quantization is idempotent
  write_jsonl(p2, loaded);
  std::ifstream f1(p1), f2(p2);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
}

TEST_CASE("empty file reads as empty dataset") {
  const std::string p = "/tmp/colactc_data_empty.jsonl";
  std::ofstream(p).close();
  CHECK(read_jsonl(p).empty());
}

TEST_CASE("missing key errors name the key and the line") {
  const std::string p = "/tmp/colactc_data_badkey.jsonl";
  {
    std::ofstream out(p);
    out << R"({"frames": [[1.0]], "transcript_ids": [0], "translation_ids": [0]})" << "\n";
    out << R"({"frames": [[1.0]], "transcript_ids": [0]})" << "\n";
  }
  try {
    read_jsonl(p);
    FAIL("expected schema error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("translation_ids") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
}

TEST_CASE("malformed json errors carry the line number") {
  const std::string p = "/tmp/colactc_data_badjson.jsonl";
  {
    std::ofstream out(p);
    out << R"({"frames": [[1.0]], "transcript_ids": [0], "translation_ids": [0]})" << "\n";
    out << "{not json\n";
  }
  try {
    read_jsonl(p);
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("id validation catches out-of-range entries") {
  auto data = generate(small_spec(), 5);
  validate_ids(data, 16, 16);
  data[2].translation_ids[0] = 16;
  CHECK_THROWS(validate_ids(data, 16, 16));
}

TEST_CASE("batch iterator partitions the dataset") {
  auto data = generate(small_spec(), 40);
  BatchIterator it(data, 12, 99);
  std::multiset<int> seen;
  int epoch0 = it.epoch();
  int batches = 0;
  for (;;) {
    const auto& b = it.next();
    if (it.epoch() != 0) break;
    ++batches;
    int tokens = 0;
    for (int idx : b) {
      seen.insert(idx);
      tokens += static_cast<int>(data[static_cast<size_t>(idx)].translation_ids.size());
    }
    CHECK(tokens <= 12);
    if (batches > 1000) FAIL("runaway iterator");
  }
  (void)epoch0;
  CHECK(seen.size() == data.size());
  for (int i = 0; i < 40; ++i) CHECK(seen.count(i) == 1);
}

TEST_CASE("batch capacity equal to a uniform length gives singleton batches") {
  TaskSpec spec = small_spec();
  spec.len_min = spec.len_max = 4;
  auto data = generate(spec, 10);
  BatchIterator it(data, 4, 1);
  for (int i = 0; i < 10; ++i) CHECK(it.next().size() == 1);
}

TEST_CASE("batch order is deterministic per seed") {
  auto data = generate(small_spec(), 30);
  BatchIterator a(data, 10, 7);
  BatchIterator b(data, 10, 7);
  for (int i = 0; i < 20; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("oversized item rejected") {
  auto data = generate(small_spec(), 10);
  CHECK_THROWS(BatchIterator(data, 1, 0));
}

TEST_CASE("expansion at least k_concat keeps every item feasible") {
  TaskSpec spec = small_spec();
  spec.expand_min = 3;
  spec.expand_max = 4;
  const int k = 3;
  auto data = generate(spec, 60);
  for (const auto& t : data) {
    Eigen::Index enc_len = (t.frames.rows() + k - 1) / k;
    CHECK(ctc_feasible(enc_len, t.transcript_ids));
  }
}

TEST_CASE("zipf frequencies fall with rank (loose diagnostic)") {
  TaskSpec spec = small_spec();
  spec.v_src = 64;
  spec.v_tgt = 64;
  spec.len_min = spec.len_max = 5;
  spec.zipf_s = 1.3;
  auto data = generate(spec, 4000);
  std::vector<int> counts(64, 0);
  for (const auto& t : data)
    for (int z : t.transcript_ids) counts[static_cast<size_t>(z)]++;
  CHECK(counts[0] > counts[20]);
  CHECK(counts[0] > 4 * std::max(counts[40], 1));
}

TEST_CASE("spec validation") {
  TaskSpec spec = small_spec();
  spec.expand_min = 0;
  CHECK_THROWS(spec.validate());
  spec = small_spec();
  spec.swap_prob = 0.9;
  CHECK_THROWS(spec.validate());
  spec = small_spec();
  spec.v_tgt = spec.v_src - 1;
  CHECK_THROWS(spec.validate());
}
