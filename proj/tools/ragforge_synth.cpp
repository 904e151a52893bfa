// Writes a synthetic course catalogue, info pages and FAQ pairs for trying the
// pipeline without the real university data.

#include "ragforge/corpus.hpp"
#include "ragforge/synthetic.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Generate synthetic input files for ragforge", "ragforge-synth"};
    std::filesystem::path out_dir = ".";
    size_t courses = 253, classes = 5288, info = 104, faq = 269, faq_valid = 133;
    uint64_t seed = 1;
    app.add_option("--out-dir", out_dir, "Directory for courses.jsonl, info.jsonl and faq.jsonl");
    app.add_option("--courses", courses, "Number of courses");
    app.add_option("--classes", classes, "Total classes across all courses");
    app.add_option("--info", info, "Number of info pages");
    app.add_option("--faq", faq, "Number of FAQ pairs");
    app.add_option("--faq-valid", faq_valid, "FAQ pairs flagged for validation");
    app.add_option("--seed", seed, "Random seed");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        namespace syn = ragforge::synthetic;
        std::filesystem::create_directories(out_dir);
        const auto course_records = syn::courses(courses, classes, seed);
        const auto info_docs = syn::info_documents(info, seed);
        const auto pairs = syn::faq_pairs(info_docs, faq, faq_valid, seed);
        ragforge::io::atomic_write(out_dir / "courses.jsonl", ragforge::format_records(course_records));
        ragforge::io::atomic_write(out_dir / "info.jsonl", ragforge::format_records(info_docs));
        ragforge::io::atomic_write(out_dir / "faq.jsonl", ragforge::format_records(pairs));
        std::cout << course_records.size() << " courses, " << info_docs.size() << " info pages, " << pairs.size()
                  << " FAQ pairs in " << out_dir.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
