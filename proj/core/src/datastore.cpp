#include "chainforge/datastore.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>

#include "chainforge/rng.hpp"

namespace chainforge {

namespace fs = std::filesystem;

char option_letter(std::size_t index) { return static_cast<char>('A' + index); }

std::string render_options(const std::vector<std::string>& options) {
    std::string out;
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (i != 0) out += '\n';
        out += option_letter(i);
        out += ". ";
        out += options[i];
    }
    return out;
}

const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

std::optional<Split> split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    return std::nullopt;
}

nlohmann::ordered_json sample_to_json(const Sample& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["dataset"] = s.dataset;
    j["split"] = to_string(s.split);
    if (s.video.duration_s) {
        j["video"] = {{"uri", s.video.uri}, {"duration_s", *s.video.duration_s}};
    } else {
        j["video"] = s.video.uri;
    }
    if (s.video_surrogate) j["video_surrogate"] = *s.video_surrogate;
    j["question"] = s.question;
    j["answer"] = s.gold_answer;
    if (s.options) {
        j["options"] = s.options->options;
        j["gold_index"] = s.options->gold_index;
    } else {
        j["options"] = nlohmann::ordered_json::array();
        j["gold_index"] = nullptr;
    }
    if (s.gold_chain) j["gold_chain"] = serialize_chain(*s.gold_chain);
    return j;
}

Result<Sample, SchemaViolation> sample_from_json(const nlohmann::json& j, std::size_t line) {
    auto bad = [line](std::string field, std::string reason) {
        return fail(SchemaViolation{line, std::move(field), std::move(reason)});
    };
    if (!j.is_object()) return bad("", "record.not_object");

    auto nonempty_string = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key) || !j[key].is_string()) return std::nullopt;
        auto v = j[key].get<std::string>();
        if (trim(v).empty()) return std::nullopt;
        return v;
    };

    Sample s;
    if (auto v = nonempty_string("id")) s.id = *v;
    else return bad("id", "id.missing");
    if (auto v = nonempty_string("dataset")) s.dataset = *v;
    else return bad("dataset", "dataset.missing");

    if (!j.contains("split") || !j["split"].is_string()) return bad("split", "split.missing");
    if (auto sp = split_from_string(j["split"].get<std::string>())) s.split = *sp;
    else return bad("split", "split.unknown");

    if (!j.contains("video")) return bad("video", "video.missing");
    const auto& video = j["video"];
    if (video.is_string()) {
        s.video.uri = video.get<std::string>();
    } else if (video.is_object() && video.contains("uri") && video["uri"].is_string()) {
        s.video.uri = video["uri"].get<std::string>();
        if (video.contains("duration_s") && !video["duration_s"].is_null()) {
            if (!video["duration_s"].is_number() || video["duration_s"].get<double>() < 0) {
                return bad("video", "video.duration_invalid");
            }
            s.video.duration_s = video["duration_s"].get<double>();
        }
    } else {
        return bad("video", "video.invalid");
    }
    if (s.video.uri.empty()) return bad("video", "video.uri_empty");

    if (j.contains("video_surrogate") && !j["video_surrogate"].is_null()) {
        if (!j["video_surrogate"].is_string()) return bad("video_surrogate", "video_surrogate.not_string");
        s.video_surrogate = j["video_surrogate"].get<std::string>();
    }

    if (auto v = nonempty_string("question")) s.question = *v;
    else return bad("question", "question.missing");
    if (auto v = nonempty_string("answer")) s.gold_answer = *v;
    else return bad("answer", "answer.missing");

    if (j.contains("options") && !j["options"].is_null()) {
        const auto& opts = j["options"];
        if (!opts.is_array()) return bad("options", "options.not_array");
        if (!opts.empty()) {
            AnswerOptions ao;
            for (const auto& o : opts) {
                if (!o.is_string() || trim(o.get<std::string>()).empty()) return bad("options", "options.empty_entry");
                ao.options.push_back(o.get<std::string>());
            }
            if (ao.options.size() < AnswerOptions::kMinOptions || ao.options.size() > AnswerOptions::kMaxOptions) {
                return bad("options", "options.count");
            }
            if (std::set<std::string>(ao.options.begin(), ao.options.end()).size() != ao.options.size()) {
                return bad("options", "options.duplicate");
            }
            if (!j.contains("gold_index") || !j["gold_index"].is_number_integer()) {
                return bad("gold_index", "gold_index.missing");
            }
            const auto gi = j["gold_index"].get<std::int64_t>();
            if (gi < 0 || static_cast<std::uint64_t>(gi) >= ao.options.size()) {
                return bad("gold_index", "gold_index.out_of_range");
            }
            ao.gold_index = static_cast<std::size_t>(gi);
            const auto matches = std::count(ao.options.begin(), ao.options.end(), s.gold_answer);
            if (matches != 1) return bad("answer", "answer.no_option_match");
            if (ao.options[ao.gold_index] != s.gold_answer) return bad("gold_index", "gold_index.answer_mismatch");
            s.options = std::move(ao);
        }
    }

    if (j.contains("gold_chain") && !j["gold_chain"].is_null()) {
        if (!j["gold_chain"].is_string()) return bad("gold_chain", "gold_chain.not_string");
        auto chain = parse_chain(j["gold_chain"].get<std::string>());
        if (!chain) return bad("gold_chain", std::string("gold_chain.") + to_string(chain.error().kind));
        s.gold_chain = std::move(chain).value();
    }
    return s;
}

Result<LoadSummary, FileUnreadable> load_samples(const fs::path& path, const std::string& expected_dataset) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fail(FileUnreadable{path.string(), "cannot open for reading"});

    LoadSummary summary;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ++summary.lines_read;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            summary.errors.push_back({lineno, "", "record.not_json"});
            continue;
        }
        auto s = sample_from_json(j, lineno);
        if (!s) {
            summary.errors.push_back(s.error());
            continue;
        }
        if (!expected_dataset.empty() && s->dataset != expected_dataset) {
            summary.errors.push_back({lineno, "dataset", "dataset.unexpected"});
            continue;
        }
        if (!ids.insert(s->id).second) {
            summary.errors.push_back({lineno, "id", "id.duplicate"});
            continue;
        }
        summary.samples.push_back(std::move(s).value());
    }
    if (in.bad()) return fail(FileUnreadable{path.string(), "read error"});
    return summary;
}

Result<WriteSummary, WriteError> write_augmented(const fs::path& path, const std::vector<Sample>& samples,
                                                 const ValidationConfig& config, const WriteProbe& probe) {
    for (const auto& s : samples) {
        if (!s.gold_chain) return fail(WriteError{WriteError::Kind::MissingChain, s.id, "record has no gold_chain", {}});
        auto report = validate_chain(serialize_chain(*s.gold_chain), config);
        if (!report.passed()) {
            return fail(WriteError{WriteError::Kind::InvalidChain, s.id, "chain fails validation", std::move(report)});
        }
    }

    static std::atomic<std::uint64_t> counter{0};
    const auto dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    const auto tmp = dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                            std::to_string(counter++));

    auto io_error = [&](std::string msg) {
        std::error_code ec;
        fs::remove(tmp, ec);
        return fail(WriteError{WriteError::Kind::Io, "", std::move(msg), {}});
    };

    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd < 0) return io_error("cannot create " + tmp.string());

    WriteSummary summary;
    for (const auto& s : samples) {
        const auto line = sample_to_json(s).dump() + "\n";
        std::size_t off = 0;
        while (off < line.size()) {
            const auto n = ::write(fd, line.data() + off, line.size() - off);
            if (n < 0) {
                ::close(fd);
                return io_error("write failed on " + tmp.string());
            }
            off += static_cast<std::size_t>(n);
        }
        summary.bytes += line.size();
        ++summary.records;
        if (probe) probe(summary.records);
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        return io_error("fsync failed on " + tmp.string());
    }
    ::close(fd);

    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) return io_error("rename to " + path.string() + " failed: " + ec.message());
    return summary;
}

CorpusStats corpus_stats(const std::vector<Sample>& samples) {
    CorpusStats st;
    st.samples = samples.size();
    std::vector<std::size_t> lengths;
    for (const auto& s : samples) {
        ++st.per_dataset[s.dataset];
        ++st.per_split[to_string(s.split)];
        if (s.gold_chain) {
            lengths.push_back(s.gold_chain->size());
            ++st.length_histogram[std::min<std::size_t>(s.gold_chain->size(), 11)];
        }
    }
    st.with_chain = lengths.size();
    if (!lengths.empty()) {
        double sum = 0;
        for (auto l : lengths) sum += static_cast<double>(l);
        st.mean_events = sum / static_cast<double>(lengths.size());
        std::sort(lengths.begin(), lengths.end());
        const auto mid = lengths.size() / 2;
        st.median_events = lengths.size() % 2 == 1
                               ? static_cast<double>(lengths[mid])
                               : (static_cast<double>(lengths[mid - 1]) + static_cast<double>(lengths[mid])) / 2.0;
    }
    return st;
}

nlohmann::ordered_json to_json(const CorpusStats& stats) {
    nlohmann::ordered_json j;
    j["samples"] = stats.samples;
    j["withChain"] = stats.with_chain;
    j["perDataset"] = stats.per_dataset;
    j["perSplit"] = stats.per_split;
    nlohmann::ordered_json hist = nlohmann::ordered_json::object();
    for (const auto& [len, count] : stats.length_histogram) hist[len > 10 ? "10+" : std::to_string(len)] = count;
    j["chainLengthHistogram"] = hist;
    j["meanEvents"] = stats.mean_events;
    j["medianEvents"] = stats.median_events;
    return j;
}

std::vector<Sample> sample_audit(const std::vector<Sample>& samples, std::size_t n, std::uint64_t seed) {
    if (n >= samples.size()) return samples;
    SeededRng rng(seed);
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<Sample> out;
    out.reserve(n);
    for (auto i : idx) out.push_back(samples[i]);
    return out;
}

std::optional<std::string> write_jsonl(const fs::path& path, const std::vector<Sample>& samples) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return "cannot open " + path.string();
    for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
    if (!out) return "write failed on " + path.string();
    return std::nullopt;
}

}  // namespace chainforge
