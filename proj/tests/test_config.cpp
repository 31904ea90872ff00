#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "shrinklab/config.hpp"

using namespace shrinklab;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ConfigParse, ValuesAndComments) {
  const ConfigTable t = ConfigTable::parse(
      "# header\n"
      "n = 10\n"
      "name = \"a # 1\"  # trailing\n"
      "flag = true\n"
      "grid.values = [0, 2.5, 1e1]\n"
      "estimators = [\"a\", \"b\",]\n"
      "\n"
      "empty = []\n");
  EXPECT_EQ(t.integer("n"), 10);
  EXPECT_EQ(t.string("name"), "a # 1");
  EXPECT_TRUE(t.boolean("flag", false));
  EXPECT_EQ(t.numbers("grid.values"), (std::vector<double>{0, 2.5, 10}));
  EXPECT_EQ(t.strings("estimators"), (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(t.numbers("empty").empty());
  EXPECT_NO_THROW(t.reject_unused());
}

TEST(ConfigParse, Fallbacks) {
  const ConfigTable t = ConfigTable::parse("x = 1.5\n");
  EXPECT_EQ(t.number("y", 2.0), 2.0);
  EXPECT_EQ(t.integer("y", 3), 3);
  EXPECT_EQ(t.seed("y", 7u), 7u);
  EXPECT_FALSE(t.boolean("y", false));
  EXPECT_EQ(t.string("y", "d"), "d");
  EXPECT_EQ(t.numbers("x"), std::vector<double>{1.5});
  EXPECT_EQ(t.strings("y", {"u"}), std::vector<std::string>{"u"});
}

TEST(ConfigParse, RoundTrip) {
  const std::string text = "b = [1, 0.1, \"q\\\"x\"]\na.c = -3.25e-07\nflag = false\ns = \"hi\"\n";
  const ConfigTable t = ConfigTable::parse(text);
  const std::string once = t.serialize();
  const ConfigTable t2 = ConfigTable::parse(once);
  EXPECT_EQ(t, t2);
  EXPECT_EQ(t2.serialize(), once);
  EXPECT_EQ(once.substr(0, 4), "a.c ");  // keys sorted
  EXPECT_EQ(t2.number("a.c"), -3.25e-07);
}

TEST(ConfigParse, SyntaxErrorsCarryLineNumbers) {
  EXPECT_NE(error_of([] { ConfigTable::parse("a = 1\nb = oops\n", "f.toml"); }).find("f.toml:2"), std::string::npos);
  EXPECT_NE(error_of([] { ConfigTable::parse("a = 1\na = 2\n", "f.toml"); }).find("duplicate key"), std::string::npos);
  EXPECT_NE(error_of([] { ConfigTable::parse("[table]\n"); }).find("tables are not supported"), std::string::npos);
  EXPECT_NE(error_of([] { ConfigTable::parse("just words\n"); }).find("expected 'key = value'"), std::string::npos);
  EXPECT_NE(error_of([] { ConfigTable::parse("a b = 1\n"); }).find("invalid character"), std::string::npos);
  EXPECT_NE(error_of([] { ConfigTable::parse("a = \"open\n"); }).find("unterminated"), std::string::npos);
  EXPECT_NE(error_of([] { ConfigTable::parse("a = [1, 2\n"); }).find("expected ','"), std::string::npos);
  EXPECT_NE(error_of([] { ConfigTable::parse("a = inf\n"); }).find("non-finite"), std::string::npos);
  EXPECT_NE(error_of([] { ConfigTable::parse("a = 1 2\n"); }).find("trailing"), std::string::npos);
}

TEST(ConfigParse, TypeErrorsNameKeyAndLine) {
  const ConfigTable t = ConfigTable::parse("\nn = 2.5\nflag = 1\nname = 3\nlist = [1, \"a\"]\nseed = -1\n", "c.toml");
  EXPECT_NE(error_of([&] { t.integer("n"); }).find("c.toml:2: key 'n': expected an integer"), std::string::npos);
  EXPECT_NE(error_of([&] { t.boolean("flag", false); }).find("c.toml:3"), std::string::npos);
  EXPECT_NE(error_of([&] { t.string("name"); }).find("quoted string"), std::string::npos);
  EXPECT_NE(error_of([&] { t.numbers("list"); }).find("list of numbers"), std::string::npos);
  EXPECT_NE(error_of([&] { t.seed("seed", 0); }).find("nonnegative"), std::string::npos);
  EXPECT_NE(error_of([&] { t.number("missing"); }).find("missing required key 'missing'"), std::string::npos);
}

TEST(ConfigParse, UnknownKeysAreRejected) {
  const ConfigTable t = ConfigTable::parse("n = 1\nnn = 2\n", "c.toml");
  t.integer("n");
  EXPECT_NE(error_of([&] { t.reject_unused(); }).find("c.toml:2: key 'nn': unknown key"), std::string::npos);
  t.integer("nn");
  EXPECT_NO_THROW(t.reject_unused());
}

TEST(ConfigParse, SettersAndLoad) {
  ConfigTable t = ConfigTable::parse("a = 1\n");
  t.set_number("a", 2);
  t.set_string("b", "x");
  EXPECT_EQ(t.number("a"), 2.0);
  EXPECT_EQ(t.string("b"), "x");
  const auto path = std::filesystem::temp_directory_path() / "shrinklab_config_test.toml";
  std::ofstream(path) << t.serialize();
  EXPECT_EQ(ConfigTable::load(path.string()), t);
  std::filesystem::remove(path);
  EXPECT_THROW(ConfigTable::load(path.string()), ConfigError);
}

TEST(ConfigParse, ShippedConfigsParse) {
  int seen = 0;
  for (const auto& e : std::filesystem::directory_iterator(SHRINKLAB_CONFIGS)) {
    if (e.path().extension() != ".toml") continue;
    const ConfigTable t = ConfigTable::load(e.path().string());
    EXPECT_TRUE(t.has("command")) << e.path();
    ++seen;
  }
  EXPECT_GE(seen, 10);
}
