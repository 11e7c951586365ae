#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainforge/perturb.hpp"
#include "chainforge/sample.hpp"

namespace fx {

std::filesystem::path dir();
std::filesystem::path path(const std::string& name);
nlohmann::json read_json(const std::string& name);
std::string read_text(const std::filesystem::path& p);

/// The 20-sample QA corpus.
std::vector<chainforge::Sample> qa_corpus();

/// Lexicons shipped with the example config.
chainforge::Lexicons lexicons();

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

}  // namespace fx
