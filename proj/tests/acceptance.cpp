// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "ragforge/corpus.hpp"
#include "ragforge/eval.hpp"
#include "ragforge/http.hpp"
#include "ragforge/synthetic.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <thread>

using namespace ragforge;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// --- corpus ---------------------------------------------------------------

Outcome corpus_counts() {
    const auto start = Clock::now();
    const auto courses = synthetic::courses(253, 5288, 7);
    const auto info = synthetic::info_documents(104, 7);
    size_t classes = 0;
    for (const auto& c : courses) {
        classes += c.classes.size();
    }
    const auto clear = build_variant(courses, info, CorpusVariant::Clear);
    const auto emb = build_variant(courses, info, CorpusVariant::Emb);
    const auto full = build_variant(courses, info, CorpusVariant::Full);
    const auto education = corpus_stats(clear).education;
    const double t = seconds_since(start);
    const bool ok = classes == 5288 && education == 506 && clear.size() == 610 && emb.size() == 610 &&
                    full.size() == 506 + classes + 104 && full.size() == 5898 && t < 5.0;
    return {ok, fmt("clear=%zu emb=%zu full=%zu education=%zu classes=%zu in %.2fs", clear.size(), emb.size(),
                    full.size(), education, classes, t)};
}

Outcome finetune_split() {
    const auto courses = synthetic::courses(253, 5288, 7);
    const auto info = synthetic::info_documents(104, 7);
    const auto clear = build_variant(courses, info, CorpusVariant::Clear);
    const auto faq = synthetic::faq_pairs(info, 269, 133, 7);
    MockProvider generator({{PromptMatcher::any(), "Risposta generata.", true, false}});
    const auto pairs = generate_finetune_pairs(clear, generator, faq);
    const auto split = split_validation(pairs.examples, 7);
    size_t valid_education = 0;
    std::map<std::string, size_t> per_course;
    for (const auto& e : split.valid) {
        if (is_education_pair(e)) {
            ++valid_education;
            ++per_course[e.course_id];
        }
    }
    bool one_each = per_course.size() == 253;
    for (const auto& [_, n] : per_course) {
        one_each = one_each && n == 1;
    }
    const bool ok = pairs.failures.empty() && pairs.examples.size() == 775 && valid_education == 253 && one_each;
    return {ok, fmt("training examples=%zu, validation education=%zu (valid total %zu, train %zu)",
                    pairs.examples.size(), valid_education, split.valid.size(), split.train.size())};
}

// --- chunker --------------------------------------------------------------

size_t enumerate_windows(size_t tokens, size_t size, size_t overlap) {
    size_t n = 0;
    for (size_t start = 0; start < tokens; start += size - overlap) {
        ++n;
        if (start + size >= tokens) {
            break;
        }
    }
    return n;
}

Outcome chunker_counts() {
    std::mt19937_64 rng(2024);
    std::string words;
    for (size_t i = 0; i < 10000; ++i) {
        words += "t" + std::to_string(i % 97) + " ";
    }
    size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t tokens = rng() % 10001;
        const size_t size = 1 + rng() % 1500;
        const size_t overlap = rng() % size;
        const ChunkParams params{size, overlap};
        const size_t oracle = enumerate_windows(tokens, size, overlap);
        // Cut the text after `tokens` words (each word is followed by one space).
        size_t cut = 0;
        for (size_t w = 0; w < tokens; ++w) {
            cut = words.find(' ', cut) + 1;
        }
        const auto chunks = chunk_text("d", std::string_view(words).substr(0, cut), params);
        if (expected_chunk_count(tokens, params) != oracle || chunks.size() != oracle) {
            ++mismatches;
        }
    }
    const size_t fixed = expected_chunk_count(1950, {1000, 50});
    return {mismatches == 0 && fixed == 2, fmt("1000 random triples, %zu mismatches; T=1950 -> %zu chunks", mismatches, fixed)};
}

// --- index ----------------------------------------------------------------

std::vector<double> random_vector(std::mt19937_64& rng, size_t dim) {
    std::normal_distribution<double> g;
    std::vector<double> v(dim);
    for (auto& x : v) {
        x = g(rng);
    }
    return v;
}

Outcome index_oracle() {
    const auto start = Clock::now();
    const size_t dim = 64;
    std::mt19937_64 rng(99);
    VectorIndex index(dim);
    std::vector<std::vector<float>> stored;
    for (int i = 0; i < 200; ++i) {
        const auto v = random_vector(rng, dim);
        index.add("v" + std::to_string(i), v);
        stored.emplace_back(v.begin(), v.end());
    }
    size_t rank_mismatches = 0;
    for (int q = 0; q < 50; ++q) {
        const auto query = random_vector(rng, dim);
        std::vector<std::pair<double, int>> scored;
        for (int i = 0; i < 200; ++i) {
            double dot = 0, qq = 0, ee = 0;
            for (size_t d = 0; d < dim; ++d) {
                dot += query[d] * stored[i][d];
                qq += query[d] * query[d];
                ee += double(stored[i][d]) * stored[i][d];
            }
            scored.emplace_back(dot / std::sqrt(qq * ee), i);
        }
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        const auto hits = index.search(EmbeddingVector{query}, 4);
        for (size_t r = 0; r < 4; ++r) {
            if (r >= hits.size() || hits[r].id != "v" + std::to_string(scored[r].second)) {
                ++rank_mismatches;
            }
        }
    }
    const auto path = std::filesystem::temp_directory_path() / "ragforge_acceptance.vidx";
    index.save(path);
    const auto bytes = io::read_file(path);
    const auto loaded = VectorIndex::load(path);
    loaded.save(path);
    const bool bit_exact = loaded == index && io::read_file(path) == bytes;
    std::filesystem::remove(path);
    const double t = seconds_since(start);
    return {rank_mismatches == 0 && bit_exact && t < 10.0,
            fmt("200x50 top-4 rank mismatches=%zu, round-trip bit-exact=%s, %.2fs", rank_mismatches,
                bit_exact ? "yes" : "no", t)};
}

// --- metrics --------------------------------------------------------------

std::string random_text(std::mt19937_64& rng, size_t min_len, size_t max_len, size_t vocab) {
    const size_t len = min_len + rng() % (max_len - min_len + 1);
    std::string out;
    for (size_t i = 0; i < len; ++i) {
        out += (i ? " " : "") + std::string("w") + std::to_string(rng() % vocab);
    }
    return out;
}

Outcome bleu_criterion() {
    const double derived = bleu("the cat sat on the mat", "the cat sat on a mat");
    std::mt19937_64 rng(17);
    size_t identity_failures = 0;
    for (int i = 0; i < 100; ++i) {
        const auto x = random_text(rng, 4, 80, 40);
        identity_failures += std::abs(bleu(x, x) - 1.0) > 1e-12 ? 1 : 0;
    }
    const double zero = bleu("uno due tre quattro cinque", "alfa beta gamma delta epsilon");
    const double no_four_gram = bleu("a b c d e f", "f e d c b a");
    const bool ok = std::abs(derived - 0.5372) <= 1e-4 && identity_failures == 0 && zero == 0.0 && no_four_gram == 0.0;
    return {ok, fmt("derived=%.6f, identity failures=%zu/100, zero-overlap=%g, no-4-gram=%g", derived,
                    identity_failures, zero, no_four_gram)};
}

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> w;
    for (std::string t; in >> t;) {
        w.push_back(t);
    }
    return w;
}

// Memoized recursive LCS, independent of the library's iterative table.
size_t lcs_recursive(const std::vector<std::string>& a, const std::vector<std::string>& b, size_t i, size_t j,
                     std::vector<std::vector<int>>& memo) {
    if (i == a.size() || j == b.size()) {
        return 0;
    }
    if (memo[i][j] >= 0) {
        return static_cast<size_t>(memo[i][j]);
    }
    const size_t v = a[i] == b[j] ? 1 + lcs_recursive(a, b, i + 1, j + 1, memo)
                                  : std::max(lcs_recursive(a, b, i + 1, j, memo), lcs_recursive(a, b, i, j + 1, memo));
    memo[i][j] = static_cast<int>(v);
    return v;
}

Outcome rouge_criterion() {
    const auto derived = rouge_l("the cat sat", "the cat is on the mat");
    std::mt19937_64 rng(23);
    size_t mismatches = 0;
    for (int i = 0; i < 500; ++i) {
        const auto c = random_text(rng, 1, 50, 8);
        const auto r = random_text(rng, 1, 50, 8);
        const auto cw = split_words(c), rw = split_words(r);
        std::vector<std::vector<int>> memo(cw.size(), std::vector<int>(rw.size(), -1));
        const double lcs = static_cast<double>(lcs_recursive(cw, rw, 0, 0, memo));
        const double p = lcs / cw.size(), rr = lcs / rw.size();
        const double f = p + rr == 0 ? 0 : 2 * p * rr / (p + rr);
        const auto got = rouge_l(c, r);
        if (std::abs(got.precision - p) > 1e-12 || std::abs(got.recall - rr) > 1e-12 || std::abs(got.f - f) > 1e-12) {
            ++mismatches;
        }
    }
    const bool ok = std::abs(derived.f - 4.0 / 9.0) <= 1e-9 && mismatches == 0;
    return {ok, fmt("derived F=%.12f (4/9=%.12f), oracle mismatches=%zu/500", derived.f, 4.0 / 9.0, mismatches)};
}

Outcome context_relevancy_criterion() {
    auto sentences = [](size_t n) {
        std::string s;
        for (size_t i = 0; i < n; ++i) {
            s += "Frase " + std::to_string(i) + ". ";
        }
        return s;
    };
    auto with = [](std::set<size_t> picked) {
        ScriptedJudge j;
        j.on_relevant = [picked](const std::string&, const std::vector<std::string>&) { return picked; };
        return j;
    };
    auto five = with({1, 2, 4, 6, 7});
    auto all = with({0, 1, 2});
    auto one = with({10});
    const double a = context_relevancy("q", sentences(8), five).value_or(-1);
    const double b = context_relevancy("q", sentences(3), all).value_or(-1);
    const double c = context_relevancy("q", sentences(11), one).value_or(-1);
    const bool ok = a == 0.625 && b == 1.0 && std::abs(c - 0.0909) <= 5e-4;
    return {ok, fmt("5 of 8 -> %.4f, all -> %.4f, 1 of 11 -> %.4f", a, b, c)};
}

// --- pipeline ---------------------------------------------------------------

Outcome call_contract() {
    std::vector<size_t> condensed, custom;
    for (auto profile : {PromptProfile::Condensed, PromptProfile::CustomOnly}) {
        auto mock = testing::routing_mock();
        auto engine = testing::make_engine(mock, {}, profile);
        ChatSession session("acceptance");
        for (int turn = 0; turn < 4; ++turn) {
            const size_t before = mock->call_count();
            engine->answer(session, "Domanda numero " + std::to_string(turn) + " sulle tasse?");
            (profile == PromptProfile::Condensed ? condensed : custom).push_back(mock->call_count() - before);
        }
    }
    const bool ok = condensed == std::vector<size_t>{1, 2, 2, 2} && custom == std::vector<size_t>{1, 1, 1, 1};
    auto show = [](const std::vector<size_t>& v) {
        std::string s;
        for (size_t x : v) {
            s += std::to_string(x);
        }
        return s;
    };
    return {ok, "calls per turn: condensed=" + show(condensed) + " custom=" + show(custom)};
}

Outcome eval_harness() {
    const auto stack = testing::make_stack();
    LexicalJudge judge;
    const auto golden = load_golden(std::filesystem::path(RAGFORGE_FIXTURES) / "golden_qa.jsonl");
    auto a = std::make_shared<MockProvider>(std::vector<ScriptEntry>{{PromptMatcher::any(), "Si pagano con PagoPA.", true, false}}, "alpha");
    auto b = std::make_shared<MockProvider>(std::vector<ScriptEntry>{{PromptMatcher::any(), "Non lo so.", true, false}}, "beta");
    const auto run = run_comparison({a, b}, golden, *stack.retriever, judge, *stack.embedder);
    std::map<std::string, std::set<std::string>> hashes;
    size_t complete = 0;
    for (const auto& row : run.rows) {
        hashes[row.question_id].insert(row.context_hash);
        complete += row.ok ? 1 : 0;
    }
    bool identical = hashes.size() == golden.size();
    for (const auto& [_, h] : hashes) {
        identical = identical && h.size() == 1;
    }
    bool capped = true;
    for (const auto& call : a->calls()) {
        capped = capped && call.params.max_new_tokens == 256u;
    }
    const auto cap = report_meta(run).at("config").at("max_new_tokens").get<size_t>();
    const bool ok = golden.size() == 6 && run.rows.size() == 12 && complete == 12 && identical && cap == 256 && capped;
    return {ok, fmt("rows=%zu complete=%zu, hashes identical across providers=%s, max_new_tokens=%zu", run.rows.size(),
                    complete, identical ? "yes" : "no", cap)};
}

// --- service ----------------------------------------------------------------

std::string conversation(const std::filesystem::path& log) {
    auto service = ChatService::open(testing::make_engine(testing::routing_mock()), log, testing::StepClock{});
    httplib::Server server;
    mount_routes(server, *service);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client c("127.0.0.1", port);
    std::string transcript;
    auto post = [&](const std::string& path, const nlohmann::json& body) {
        auto r = c.Post(path, body.dump(), "application/json");
        transcript += r ? std::to_string(r->status) + " " + r->body + "\n" : "no response\n";
        return r ? nlohmann::json::parse(r->body) : nlohmann::json();
    };
    const std::string id = post("/sessions", nlohmann::json::object()).value("session_id", "");
    post("/sessions/" + id + "/messages", {{"question", "Come si pagano le tasse?"}});
    post("/sessions/" + id + "/messages", {{"question", "E quando scade la prima rata?"}});
    post("/sessions/" + id + "/feedback",
         {{"respondent_role", "SecondarySchoolStudent"}, {"overall_rating", 4}, {"per_answer_ratings", {"Good", "Excellent"}}});
    auto stats = c.Get("/stats");
    transcript += stats ? stats->body + "\n" : "no response\n";
    server.stop();
    t.join();
    return transcript;
}

Outcome service_criterion() {
    const auto dir = std::filesystem::temp_directory_path() / "ragforge_acceptance_service";
    std::vector<std::string> transcripts;
    bool restart_ok = true;
    for (int run = 0; run < 3; ++run) {
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        transcripts.push_back(conversation(dir / "state.jsonl"));
        auto reopened = ChatService::open(testing::make_engine(testing::routing_mock()), dir / "state.jsonl");
        const auto s = reopened->stats();
        restart_ok = restart_ok && s.total_questions == 2 && s.feedback == 1 && reopened->session("s-000001").size() == 2 &&
                     transcripts.back().find(s.to_json().dump()) != std::string::npos;
    }
    const bool deterministic = transcripts[0] == transcripts[1] && transcripts[1] == transcripts[2] &&
                               transcripts[0].find("no response") == std::string::npos;

    ChatService tagged(testing::make_engine(testing::routing_mock()));
    std::mt19937_64 rng(165);
    std::string id;
    for (int i = 0; i < 165; ++i) {
        if (i % 3 == 0) {
            id = tagged.create_session();
        }
        const auto turn = tagged.post_message(id, "Domanda " + std::to_string(i) + "?").turn;
        tagged.tag_question(id, turn, kAllCategories[rng() % kAllCategories.size()]);
    }
    const auto s = tagged.stats();
    std::filesystem::remove_all(dir);
    const bool histogram = s.histogram_total() == 165 && s.total_questions == 165 && s.categories.at("untagged") == 0;
    return {deterministic && restart_ok && histogram,
            fmt("3 runs identical=%s, restart intact=%s, tagged histogram sum=%zu", deterministic ? "yes" : "no",
                restart_ok ? "yes" : "no", s.histogram_total())};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"corpus counts", corpus_counts},
        {"fine-tune split", finetune_split},
        {"chunker", chunker_counts},
        {"index", index_oracle},
        {"bleu", bleu_criterion},
        {"rouge-l", rouge_criterion},
        {"context relevancy", context_relevancy_criterion},
        {"pipeline call contract", call_contract},
        {"evaluation harness", eval_harness},
        {"service", service_criterion},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s  %-24s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        failed += o.pass ? 0 : 1;
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed == 0 ? 0 : 1;
}
