#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace std;
namespace fs = std::filesystem;

namespace {

const string kBin = UCC_BIN;
const string kCorpus = string(UCC_REPO_DIR) + "/corpus/ucc_corpus.json";
const string kAssets = string(UCC_REPO_DIR) + "/assets";

struct CommandResult {
    int exit_code;
    string output;
};

CommandResult run_command(const string& args) {
    const string command = kBin + " " + args + " 2>&1";
    array<char, 4096> buffer{};
    string output;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buffer.data(), buffer.size(), pipe) != nullptr) output += buffer.data();
    const int status = pclose(pipe);
    return CommandResult{WEXITSTATUS(status), output};
}

string slurp(const fs::path& path) {
    ifstream in(path);
    REQUIRE(in);
    ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("cli: validate accepts the shipped corpus") {
    const CommandResult r = run_command("validate --corpus " + kCorpus);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("validation: OK") != string::npos);
    CHECK(r.output.find("34 conventions") != string::npos);
}

TEST_CASE("cli: validate exits nonzero on a broken corpus file") {
    const fs::path bad = fs::temp_directory_path() / "ucc-bad-corpus.json";
    ofstream(bad) << "{\"version\": 1}";
    const CommandResult r = run_command("validate --corpus " + bad.string());
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("error:") != string::npos);
    fs::remove(bad);
}

TEST_CASE("cli: run produces artifacts and byte-stable trial logs") {
    const fs::path out1 = fs::temp_directory_path() / "ucc-cli-run1";
    const fs::path out2 = fs::temp_directory_path() / "ucc-cli-run2";
    fs::remove_all(out1);
    fs::remove_all(out2);

    const string base = "run --corpus " + kCorpus + " --assets " + kAssets +
                        " --agent scripted --sanitizer off --out ";
    const CommandResult r1 = run_command(base + out1.string());
    CHECK(r1.exit_code == 0);
    CHECK(r1.output.find("rate=100.0%") != string::npos);
    const CommandResult r2 = run_command(base + out2.string());
    CHECK(r2.exit_code == 0);

    for (const char* name :
         {"trials.jsonl", "metrics.json", "report.txt", "rates.csv", "failure_modes.csv"})
        CHECK(fs::exists(out1 / name));
    CHECK(slurp(out1 / "trials.jsonl") == slurp(out2 / "trials.jsonl"));
    CHECK(slurp(out1 / "report.txt") == slurp(out2 / "report.txt"));

    SUBCASE("report re-renders the run with its original config echo") {
        const CommandResult rep = run_command("report " + out1.string());
        CHECK(rep.exit_code == 0);
        CHECK(rep.output.find("sanitizer=off") != string::npos);
        CHECK(rep.output.find("contamination rate (%) by dataset and type") != string::npos);
        CHECK(rep.output.find("dataset,type,pairs") != string::npos); // csv block
    }

    fs::remove_all(out1);
    fs::remove_all(out2);
}

TEST_CASE("cli: report on a missing run directory fails cleanly") {
    const CommandResult r = run_command("report /nonexistent/ucc-run");
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("error:") != string::npos);
}

TEST_CASE("cli: dump serializes the seeded and contaminated states") {
    const string base = "dump --corpus " + kCorpus + " --dataset mimic3 ";
    const CommandResult seeds = run_command(base);
    CHECK(seeds.exit_code == 0);
    // header plus the four seed entries
    CHECK(count(seeds.output.begin(), seeds.output.end(), '\n') == 5);

    const CommandResult poisoned = run_command(base + "--source mimic3-tc-01");
    CHECK(poisoned.exit_code == 0);
    CHECK(count(poisoned.output.begin(), poisoned.output.end(), '\n') == 6);
    CHECK(poisoned.output.find("\"instance_id\":\"mimic3-tc-01\"") != string::npos);
    CHECK(poisoned.output.find("\"sanitized\":false") != string::npos);

    const CommandResult sanitized = run_command(base + "--source mimic3-tc-01 --sanitizer rules");
    CHECK(sanitized.exit_code == 0);
    CHECK(sanitized.output.find("\"sanitized\":true") != string::npos);
    CHECK(sanitized.output.find("For internal dashboards") == string::npos);

    const CommandResult unknown = run_command(base + "--source not-a-convention");
    CHECK(unknown.exit_code != 0);
}

TEST_CASE("cli: config file settings apply and flags override them") {
    const fs::path cfg = fs::temp_directory_path() / "ucc-cli-config.json";
    ofstream(cfg) << R"({"corpus": ")" << kCorpus << R"(", "sanitizer": "rules", "trials": 1})";

    const CommandResult from_file = run_command("run --config " + cfg.string());
    CHECK(from_file.exit_code == 0);
    CHECK(from_file.output.find("sanitizer=rules") != string::npos);
    CHECK(from_file.output.find("trials=1") != string::npos);

    const CommandResult overridden =
        run_command("run --config " + cfg.string() + " --sanitizer off");
    CHECK(overridden.exit_code == 0);
    CHECK(overridden.output.find("sanitizer=off") != string::npos);
    CHECK(overridden.output.find("trials=1") != string::npos); // file value survives
    fs::remove(cfg);
}
