#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(KCSP_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    std::string out;
    char buf[4096];
    while (const std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int st = pclose(p);
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("Exit codes", "[cli]") {
    CHECK(run("verify lem1 --s 8").code == 0);
    CHECK(run("verify lem1 --s 4").code == 1);
    CHECK(run("verify nosuchlemma").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("exact M --m six").code == 2);
}

TEST_CASE("exact M prints the count", "[cli]") {
    const auto r = run("exact M --m 6 --n 3 --format json");
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["config"]["schema_version"].is_number_integer());
    CHECK(j["config"]["subcommand"] == "exact");
    CHECK(r.out.find("\"90\"") != std::string::npos);
}

TEST_CASE("Figure 2 grid size", "[cli]") {
    const auto r = run("surface fig2 --s 3 --resolution 256 --format csv");
    REQUIRE(r.code == 0);
    std::size_t lines = 0;
    for (char c : r.out) lines += c == '\n';
    CHECK(lines == 65536 + 2);
    CHECK(r.out.rfind("# config: {", 0) == 0);
}

TEST_CASE("Replay reproduces output byte for byte", "[cli]") {
    const auto dir = std::filesystem::temp_directory_path() / "kcsp_cli_test";
    std::filesystem::create_directories(dir);
    for (const std::string fmt : {"csv", "json"}) {
        const auto first = dir / ("first." + fmt), second = dir / ("second." + fmt);
        REQUIRE(run("simulate core --model mod3 --n 20000 --gamma 0.9 --seed 4 --format " + fmt + " --out " +
                    first.string()).code == 0);
        REQUIRE(run("replay " + first.string() + " --out " + second.string()).code == 0);
        CHECK(slurp(first) == slurp(second));
        CHECK(!slurp(first).empty());
    }
    std::filesystem::remove_all(dir);
}
