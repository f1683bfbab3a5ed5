#include "dlab/records.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "dlab/config.hpp"
#include "dlab/tables.hpp"

using namespace dlab;

namespace {

RunRecord sample_record(double final_loss = 1.25) {
  RunRecord r;
  r.algorithm = "diloco";
  r.n = 1e8;
  r.m = 4;
  r.h = 30;
  r.b = 512;
  r.gamma = 0.01;
  r.eta = 0.8;
  r.seed = 42;
  r.weight_decay = 1.0 / 2000;
  r.t_steps = 2000;
  r.tokens_d = 1.0e6;
  r.loss_curve = {{100, 2.5}, {2000, final_loss}};
  r.final_loss = final_loss;
  r.status = "ok";
  return r;
}

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("dlab_store_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path file(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace

TEST(RecordJson, RoundTripPreservesAllFields) {
  RunRecord r = sample_record();
  RunRecord back = record_from_json(to_json(r));
  EXPECT_EQ(back.schema_version, r.schema_version);
  EXPECT_EQ(back.algorithm, r.algorithm);
  EXPECT_EQ(back.n, r.n);
  EXPECT_EQ(back.m, r.m);
  EXPECT_EQ(back.h, r.h);
  EXPECT_EQ(back.b, r.b);
  EXPECT_EQ(back.gamma, r.gamma);
  EXPECT_EQ(back.eta, r.eta);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.weight_decay, r.weight_decay);
  EXPECT_EQ(back.t_steps, r.t_steps);
  EXPECT_EQ(back.tokens_d, r.tokens_d);
  EXPECT_EQ(back.final_loss, r.final_loss);
  EXPECT_EQ(back.status, r.status);
  EXPECT_EQ(back.loss_curve, r.loss_curve);
}

TEST(RecordJson, RejectsUnknownSchemaVersion) {
  auto j = to_json(sample_record());
  j["schema_version"] = 2;
  EXPECT_THROW(record_from_json(j), std::runtime_error);
}

TEST(RunStoreTest, PutContainsAndDedupe) {
  TempDir tmp;
  RunStore store(tmp.file("runs.jsonl"));
  RunRecord r = sample_record();
  EXPECT_FALSE(store.contains(key_of(r)));
  EXPECT_TRUE(store.put(r));
  EXPECT_TRUE(store.contains(key_of(r)));
  EXPECT_EQ(store.size(), 1u);
  // Same key again: rejected unless forced.
  RunRecord again = sample_record(0.99);
  EXPECT_FALSE(store.put(again));
  EXPECT_EQ(store.all()[0].final_loss, 1.25);
}

TEST(RunStoreTest, ForcedRerunAppendsAndLastWins) {
  TempDir tmp;
  auto path = tmp.file("runs.jsonl");
  {
    RunStore store(path);
    store.put(sample_record(1.25));
    EXPECT_TRUE(store.put(sample_record(0.99), /*force=*/true));
    EXPECT_EQ(store.size(), 1u);
    EXPECT_EQ(store.all()[0].final_loss, 0.99);
  }
  // The file keeps both lines; a fresh load keeps the last occurrence.
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++lines;
  }
  EXPECT_EQ(lines, 2);
  RunStore reloaded(path);
  EXPECT_EQ(reloaded.size(), 1u);
  EXPECT_EQ(reloaded.all()[0].final_loss, 0.99);
}

TEST(RunStoreTest, DistinctKeysAccumulate) {
  TempDir tmp;
  RunStore store(tmp.file("runs.jsonl"));
  RunRecord a = sample_record();
  RunRecord b = sample_record();
  b.seed = 43;
  RunRecord c = sample_record();
  c.gamma = 0.02;
  EXPECT_TRUE(store.put(a));
  EXPECT_TRUE(store.put(b));
  EXPECT_TRUE(store.put(c));
  EXPECT_EQ(store.size(), 3u);
}

TEST(TableIo, RoundTripWithCommentsAndSchema) {
  TempDir tmp;
  Table t;
  t.schema = "dlab-table-v1";
  t.columns = {"name", "value"};
  t.rows = {{"a", "1.5"}, {"b", "2.5"}};
  auto path = tmp.file("t.csv");
  write_table(path, t, {"generated by a test", "second comment"});
  Table back = load_table(path);
  EXPECT_EQ(back.schema, "dlab-table-v1");
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_DOUBLE_EQ(back.num(1, "value"), 2.5);
  EXPECT_EQ(back.str(0, "name"), "a");
  EXPECT_THROW(back.num(0, "missing"), std::invalid_argument);
}

TEST(TableIo, RejectsMissingSchemaAndMalformedRows) {
  TempDir tmp;
  auto no_schema = tmp.file("no_schema.csv");
  std::ofstream(no_schema) << "a,b\n1,2\n";
  EXPECT_THROW(load_table(no_schema), std::runtime_error);
  auto ragged = tmp.file("ragged.csv");
  std::ofstream(ragged) << "schema=dlab-table-v1\na,b\n1,2,3\n";
  EXPECT_THROW(load_table(ragged), std::runtime_error);
  EXPECT_THROW(load_table(tmp.file("absent.csv")), std::runtime_error);
}

TEST(ConfigTest, SectionsCommentsAndTypes) {
  auto cfg = Config::parse(
      "# top comment\n"
      "[run]\n"
      "algorithm = diloco  # trailing comment\n"
      "n = 1e8\n"
      "replicas = 4\n"
      "force = true\n"
      "\n"
      "[fit]\n"
      "kind = joint\n");
  EXPECT_EQ(cfg.get_str("run.algorithm"), "diloco");
  EXPECT_DOUBLE_EQ(cfg.get_num("run.n"), 1e8);
  EXPECT_EQ(cfg.get_int("run.replicas", 1), 4);
  EXPECT_TRUE(cfg.get_bool("run.force", false));
  EXPECT_EQ(cfg.get_str("fit.kind"), "joint");
  EXPECT_TRUE(cfg.has("run.n"));
  EXPECT_FALSE(cfg.has("run.absent"));
  EXPECT_EQ(cfg.get_str("run.absent", "dflt"), "dflt");
  EXPECT_DOUBLE_EQ(cfg.get_num("run.absent", 2.5), 2.5);
  EXPECT_THROW(cfg.get_str("run.absent"), std::runtime_error);
}

TEST(ConfigTest, RejectsMalformedLines) {
  EXPECT_THROW(Config::parse("[run]\nno equals sign\n"), std::runtime_error);
  EXPECT_THROW(Config::parse_file("/nonexistent/config.ini"),
               std::runtime_error);
}
