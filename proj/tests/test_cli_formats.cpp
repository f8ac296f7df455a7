#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "razh/retrieval.hpp"

using namespace razh;
namespace fs = std::filesystem;

namespace {

const std::string cli = RAZH_CLI_PATH;

struct Run {
    int exit_code = -1;
    std::string out;
    std::string err;
};

Run run(const fs::path& dir, const std::string& args) {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd =
        cli + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::vector<std::vector<std::string>> parse_tsv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, '\t')) cells.push_back(cell);
        if (!cells.empty()) rows.push_back(cells);
    }
    return rows;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_config(const fs::path& p, std::size_t epochs) {
    std::ofstream os(p);
    os << "# desk-scale configuration\n"
          "image_size = 16\n"
          "patch_size = 8\n"
          "d_v = 16\n"
          "d_a = 8\n"
          "word_dim = 8\n"
          "code_length = 8\n"
          "k_clusters = 2\n"
          "epochs = " << epochs << "\n"
          "batch_size = 8\n"
          "learning_rate = 0.005\n"
          "seed = 21\n"
          "alpha = 1.0\n"
          "beta = 0.01\n";
}

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() /
              ("razh_cli_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string p(const char* name) const { return (dir / name).string(); }
};

/// synth + split + short train, shared by several cases.
void build_pipeline(const Workspace& w, std::size_t epochs = 3) {
    REQUIRE(run(w.dir, "synth --out " + w.p("ds.rzds") +
                           " --classes 4 --attrs 4 --per-class 6 --size 16 "
                           "--patch 8 --seed 7")
                .exit_code == 0);
    REQUIRE(run(w.dir, "split --ds " + w.p("ds.rzds") + " --unseen 1 --seed 1 --out " +
                           w.p("split.json"))
                .exit_code == 0);
    write_config(w.dir / "train.cfg", epochs);
    REQUIRE(run(w.dir, "train --ds " + w.p("ds.rzds") + " --split " + w.p("split.json") +
                           " --config " + w.p("train.cfg") + " --out " + w.p("model.rzck"))
                .exit_code == 0);
}

} // namespace

TEST_CASE("pipeline files carry their magic bytes") {
    Workspace w;
    build_pipeline(w);
    REQUIRE(run(w.dir, "encode --model " + w.p("model.rzck") + " --ds " + w.p("ds.rzds") +
                           " --split " + w.p("split.json") + " --ids retrieval --out " +
                           w.p("db.rzdb"))
                .exit_code == 0);
    CHECK(read_bytes(w.dir / "ds.rzds").substr(0, 4) == "RZDS");
    CHECK(read_bytes(w.dir / "model.rzck").substr(0, 4) == "RZCK");
    CHECK(read_bytes(w.dir / "db.rzdb").substr(0, 4) == "RZDB");
    // Split file is human-readable JSON with the id lists.
    const std::string split = read_bytes(w.dir / "split.json");
    CHECK(split.find("train_ids") != std::string::npos);
    CHECK(split.find("unseen") != std::string::npos);
}

TEST_CASE("train logs a TSV loss table with headers") {
    Workspace w;
    build_pipeline(w, 4);
    // Re-run training to inspect stdout (build_pipeline discards its copy).
    const Run r = run(w.dir, "train --ds " + w.p("ds.rzds") + " --split " +
                                 w.p("split.json") + " --config " + w.p("train.cfg") +
                                 " --out " + w.p("model2.rzck"));
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_tsv(r.out);
    REQUIRE(rows.size() == 5); // header + 4 epochs
    CHECK(rows[0] == std::vector<std::string>{"epoch", "total", "cls", "hash", "rec", "hal"});
    for (std::size_t e = 1; e < rows.size(); ++e) {
        CHECK(rows[e].size() == 6);
        CHECK(rows[e][0] == std::to_string(e));
        for (std::size_t c = 1; c < 6; ++c) CHECK(std::stod(rows[e][c]) >= 0.0);
    }
}

TEST_CASE("re-running commands produces byte-identical outputs") {
    Workspace w;
    build_pipeline(w);
    REQUIRE(run(w.dir, "synth --out " + w.p("ds2.rzds") +
                           " --classes 4 --attrs 4 --per-class 6 --size 16 "
                           "--patch 8 --seed 7")
                .exit_code == 0);
    CHECK(read_bytes(w.dir / "ds.rzds") == read_bytes(w.dir / "ds2.rzds"));

    REQUIRE(run(w.dir, "train --ds " + w.p("ds.rzds") + " --split " + w.p("split.json") +
                           " --config " + w.p("train.cfg") + " --out " + w.p("model2.rzck"))
                .exit_code == 0);
    CHECK(read_bytes(w.dir / "model.rzck") == read_bytes(w.dir / "model2.rzck"));
}

TEST_CASE("eval emits mAP and curve TSVs; self-exclusion is honored") {
    Workspace w;
    // Hand-built db with unique codes; queries are the db itself.
    std::vector<HashCode> codes;
    std::vector<std::uint32_t> labels, ids;
    for (int i = 0; i < 8; ++i) {
        HashCode c(8, -1);
        for (int b = 0; b < 8; ++b) c[b] = (i >> (b % 3)) & 1 ? 1 : -1;
        c[7] = i % 2 ? 1 : -1;
        c[6] = (i / 2) % 2 ? 1 : -1;
        c[5] = (i / 4) % 2 ? 1 : -1; // bits 5..7 alone make the codes unique
        codes.push_back(c);
        labels.push_back(static_cast<std::uint32_t>(i % 2));
        ids.push_back(static_cast<std::uint32_t>(i));
    }
    const HashCodeDB db = build_db(codes, labels, ids);
    save_codes(w.p("db.rzdb"), db);

    const Run with_self = run(w.dir, "eval --codes " + w.p("db.rzdb") + " --queries " +
                                         w.p("db.rzdb") + " --cutoff 8 --curves " +
                                         w.p("curves"));
    REQUIRE(with_self.exit_code == 0);
    auto rows = parse_tsv(with_self.out);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == std::vector<std::string>{"metric", "value"});
    CHECK(rows[1][0] == "map");
    const double map_self = std::stod(rows[1][1]);
    CHECK(map_self == doctest::Approx(map_at_k(db, db, 8)).epsilon(1e-9));

    const Run excl = run(w.dir, "eval --codes " + w.p("db.rzdb") + " --queries " +
                                    w.p("db.rzdb") + " --cutoff 8 --self-exclude");
    REQUIRE(excl.exit_code == 0);
    const double map_excl = std::stod(parse_tsv(excl.out)[1][1]);
    CHECK(map_excl == doctest::Approx(map_at_k(db, db, 8, true)).epsilon(1e-9));
    CHECK(map_self > map_excl); // unique codes put the self-match at rank 1

    for (const char* name : {"pr.tsv", "p_at_n.tsv", "r_at_n.tsv"}) {
        const auto curve = parse_tsv(read_bytes(w.dir / "curves" / name));
        REQUIRE(curve.size() >= 2);
        CHECK(curve[0].size() == 2); // header names the two columns
        for (std::size_t i = 1; i < curve.size(); ++i) {
            const double y = std::stod(curve[i][1]);
            CHECK(y >= 0.0);
            CHECK(y <= 1.0);
        }
    }
}

TEST_CASE("grid prints one row per cell plus the best line") {
    Workspace w;
    build_pipeline(w, 1);
    write_config(w.dir / "grid.cfg", 1);
    const Run r = run(w.dir, "grid --ds " + w.p("ds.rzds") + " --split " +
                                 w.p("split.json") + " --config " + w.p("grid.cfg") +
                                 " --alphas 0.0,1.0 --betas 0.01");
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_tsv(r.out);
    REQUIRE(rows.size() == 4); // header + 2 cells + best
    CHECK(rows[0] == std::vector<std::string>{"alpha", "beta", "map"});
    CHECK(rows[1][0] == "0");
    CHECK(rows[2][0] == "1");
    CHECK(rows[3][0] == "best");
}

TEST_CASE("gradcheck reports every loss under tolerance") {
    Workspace w;
    write_config(w.dir / "gc.cfg", 1);
    const Run r = run(w.dir, "gradcheck --config " + w.p("gc.cfg"));
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_tsv(r.out);
    REQUIRE(rows.size() == 5);
    const std::vector<std::string> expect = {"cls", "hash", "rec", "hal", "total"};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(rows[i][0] == expect[i]);
        CHECK(std::stod(rows[i][1]) <= 1e-6);
    }
}

TEST_CASE("confusion writes a labeled square TSV") {
    Workspace w;
    build_pipeline(w);
    REQUIRE(run(w.dir, "encode --model " + w.p("model.rzck") + " --ds " + w.p("ds.rzds") +
                           " --split " + w.p("split.json") + " --ids retrieval --out " +
                           w.p("db.rzdb"))
                .exit_code == 0);
    REQUIRE(run(w.dir, "confusion --codes " + w.p("db.rzdb") + " --out " + w.p("conf.tsv"))
                .exit_code == 0);
    const auto rows = parse_tsv(read_bytes(w.dir / "conf.tsv"));
    REQUIRE(rows.size() >= 2);
    const std::size_t n = rows[0].size() - 1; // "class" + one column per class
    CHECK(rows.size() == n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        CHECK(rows[i].size() == n + 1);
        CHECK(rows[i][0] == rows[0][i]); // symmetric labeling
    }
}

TEST_CASE("exit codes distinguish config, data, and numeric failures") {
    Workspace w;
    build_pipeline(w, 1);

    SUBCASE("unknown config key -> 2") {
        std::ofstream(w.dir / "bad.cfg") << "no_such_key = 1\n";
        CHECK(run(w.dir, "train --ds " + w.p("ds.rzds") + " --split " + w.p("split.json") +
                             " --config " + w.p("bad.cfg") + " --out " + w.p("x.rzck"))
                  .exit_code == 2);
    }
    SUBCASE("bad flag -> 2") {
        CHECK(run(w.dir, "synth --no-such-flag").exit_code == 2);
    }
    SUBCASE("missing dataset -> 3") {
        CHECK(run(w.dir, "split --ds " + w.p("absent.rzds") + " --out " + w.p("s.json"))
                  .exit_code == 3);
    }
    SUBCASE("corrupt code db -> 3") {
        std::ofstream(w.dir / "junk.rzdb", std::ios::binary) << "JUNKJUNKJUNK";
        CHECK(run(w.dir, "confusion --codes " + w.p("junk.rzdb") + " --out " +
                             w.p("c.tsv"))
                  .exit_code == 3);
    }
    SUBCASE("diverging training -> 4") {
        std::ofstream(w.dir / "blow.cfg")
            << "image_size = 16\npatch_size = 8\nd_v = 16\nd_a = 8\nword_dim = 8\n"
               "code_length = 8\nk_clusters = 2\nepochs = 1\nbatch_size = 4\n"
               "learning_rate = 1e155\nseed = 21\n";
        CHECK(run(w.dir, "train --ds " + w.p("ds.rzds") + " --split " + w.p("split.json") +
                             " --config " + w.p("blow.cfg") + " --out " + w.p("x.rzck"))
                  .exit_code == 4);
    }
}
