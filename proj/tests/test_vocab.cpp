#include <stdexcept>
#include <algorithm>
#include <cstdio>
#include <fstream>

#include "colactc/prng.hpp"
#include "colactc/vocab.hpp"
#include "doctest.h"

using namespace colactc;

namespace {
std::string temp_path(const std::string& name) {
  return std::string("/tmp/colactc_vocab_") + name;
}
void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}
}  // namespace

TEST_CASE("load assigns ids by line index") {
  auto p = temp_path("basic.txt");
  write_file(p, "the\na\ncat\n");
  auto v = load_vocabulary(p);
  CHECK(v.size() == 3);
  CHECK(v.id_of("cat") == 2);
  CHECK(v.id_of("the") == 0);
  CHECK(v.token_of(1) == "a");
}

TEST_CASE("single-line file") {
  auto p = temp_path("one.txt");
  write_file(p, "x\n");
  auto v = load_vocabulary(p);
  CHECK(v.size() == 1);
  CHECK(v.id_of("x") == 0);
}

TEST_CASE("duplicate token names token and both lines") {
  auto p = temp_path("dup.txt");
  write_file(p, "a\na\n");
  try {
    load_vocabulary(p);
    FAIL("expected duplicate error");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("\"a\"") != std::string::npos);
    CHECK(msg.find("1,2") != std::string::npos);
  }
}

TEST_CASE("empty file rejected") {
  auto p = temp_path("empty.txt");
  write_file(p, "");
  CHECK_THROWS(load_vocabulary(p));
}

TEST_CASE("build_from_corpus ranks by count") {
  auto v = build_from_corpus({{"a", "b", "a"}});
  CHECK(v.tokens() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("build_from_corpus breaks ties by first occurrence") {
  auto v = build_from_corpus({{"b", "a"}, {"a", "b"}});
  CHECK(v.tokens() == std::vector<std::string>{"b", "a"});
}

TEST_CASE("build_from_corpus orders counts 5,3,1") {
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < 5; ++i) corpus.push_back({"x"});
  for (int i = 0; i < 3; ++i) corpus.push_back({"y"});
  corpus.push_back({"z"});
  auto v = build_from_corpus(corpus);
  CHECK(v.id_of("x") == 0);
  CHECK(v.id_of("y") == 1);
  CHECK(v.id_of("z") == 2);
}

TEST_CASE("build_from_corpus rejects empty corpus") {
  CHECK_THROWS(build_from_corpus({}));
  CHECK_THROWS(build_from_corpus({{}, {}}));
}

TEST_CASE("counts non-increasing along rank (property)") {
  SplitMix64 rng(11);
  for (int round = 0; round < 20; ++round) {
    std::vector<std::vector<std::string>> corpus;
    int sentences = 1 + static_cast<int>(rng.below(20));
    for (int s = 0; s < sentences; ++s) {
      std::vector<std::string> sent;
      int len = 1 + static_cast<int>(rng.below(30));
      for (int i = 0; i < len; ++i) {
        sent.push_back("t" + std::to_string(rng.below(12)));
      }
      corpus.push_back(sent);
    }
    auto v = build_from_corpus(corpus);
    // recount and check ordering
    std::vector<std::int64_t> counts(static_cast<size_t>(v.size()), 0);
    for (auto& sent : corpus)
      for (auto& tok : sent) counts[static_cast<size_t>(v.id_of(tok))]++;
    for (size_t i = 1; i < counts.size(); ++i) CHECK(counts[i - 1] >= counts[i]);
  }
}

TEST_CASE("shuffle: V=1 is the only bijection") {
  auto p = shuffle_ids(1, 123);
  CHECK(p.perm == std::vector<int>{0});
}

TEST_CASE("shuffle: identical seeds agree") {
  auto a = shuffle_ids(5, 7);
  auto b = shuffle_ids(5, 7);
  CHECK(a.perm == b.perm);
}

TEST_CASE("shuffle: image is exactly 0..V-1") {
  auto p = shuffle_ids(100, 7);
  auto sorted = p.perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
}

TEST_CASE("shuffle bijectivity for random V (property)") {
  SplitMix64 rng(3);
  for (int round = 0; round < 25; ++round) {
    int v = 1 + static_cast<int>(rng.below(10000));
    auto p = shuffle_ids(v, rng.next_u64());
    auto sorted = p.perm;
    std::sort(sorted.begin(), sorted.end());
    bool ok = true;
    for (int i = 0; i < v; ++i) ok = ok && sorted[static_cast<size_t>(i)] == i;
    CHECK(ok);
  }
}

TEST_CASE("vocabulary save then load is identity") {
  auto v = build_from_corpus({{"roundtrip", "b", "roundtrip", "c\xC3\xA9"}});
  auto p = temp_path("rt.txt");
  save_vocabulary(v, p);
  auto w = load_vocabulary(p);
  CHECK(w.tokens() == v.tokens());
}

TEST_CASE("permutation json round trip") {
  auto p = shuffle_ids(17, 5);
  auto path = temp_path("perm.json");
  save_permutation(p, path);
  auto q = load_permutation(path);
  CHECK(q.perm == p.perm);

  write_file(temp_path("badperm.json"), "[0,0,2]");
  CHECK_THROWS(load_permutation(temp_path("badperm.json")));
}
