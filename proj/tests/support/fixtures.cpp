#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "chainforge/datastore.hpp"

namespace fx {

std::filesystem::path dir() { return CHAINFORGE_TEST_FIXTURES; }

std::filesystem::path path(const std::string& name) { return dir() / name; }

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

nlohmann::json read_json(const std::string& name) { return nlohmann::json::parse(read_text(path(name))); }

std::vector<chainforge::Sample> qa_corpus() {
    auto r = chainforge::load_samples(path("qa_corpus.jsonl"));
    if (!r || !r->errors.empty()) throw std::runtime_error("qa_corpus.jsonl does not load cleanly");
    return r->samples;
}

chainforge::Lexicons lexicons() {
    const std::filesystem::path base = CHAINFORGE_CONFIG_DIR;
    auto actors = chainforge::Lexicons::read_actors(base / "lexicons/actors.txt");
    auto antonyms = chainforge::Lexicons::read_antonyms(base / "lexicons/antonyms.tsv");
    if (!actors || !antonyms) throw std::runtime_error("example lexicons missing");
    auto lx = chainforge::Lexicons::make(*actors, *antonyms);
    if (!lx) throw std::runtime_error(lx.error());
    return *lx;
}

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("chainforge-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace fx
