#pragma once

// Authentication-log ingestion: parsing, field-level tokenization,
// vocabularies, pretrain-corpus construction, and a seeded synthetic
// corpus generator used for desk-scale experiments.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "advlog/rng.hpp"

namespace advlog {

struct FieldCountError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonNumericTimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One 9-field authentication record: time plus 8 categorical fields.
struct LogLine {
    int64_t time = 0;
    std::string src_user, dst_user, src_comp, dst_comp;
    std::string auth_type, logon_type, auth_orient, outcome;

    std::string to_text() const;
    bool operator==(const LogLine&) const = default;
};

struct Corpus {
    std::vector<LogLine> lines;
    std::optional<std::vector<uint8_t>> labels;  // red-team involvement, one per line

    size_t size() const { return lines.size(); }
    void check() const {
        if (labels && labels->size() != lines.size())
            throw std::invalid_argument("Corpus: label count != line count");
    }
};

// Token ids with reserved markers. Non-reserved ids are assigned by
// descending corpus count, ties broken lexicographically.
class Vocab {
public:
    static constexpr int kSol = 0;
    static constexpr int kEol = 1;
    static constexpr int kOov = 2;
    static constexpr const char* kSolText = "<SOL>";
    static constexpr const char* kEolText = "<EOL>";
    static constexpr const char* kOovText = "<OOV>";

    Vocab() : Vocab(std::vector<std::string>{}, 1) {}
    // tokens: non-reserved tokens already in id order (ids 3, 4, ...).
    Vocab(std::vector<std::string> tokens, size_t min_count);

    size_t size() const { return id_to_token_.size(); }
    size_t min_count() const { return min_count_; }
    int id_of(const std::string& token) const {
        auto it = token_to_id_.find(token);
        return it == token_to_id_.end() ? kOov : it->second;
    }
    bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }
    const std::string& token_of(int id) const { return id_to_token_.at(static_cast<size_t>(id)); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    size_t min_count_;
};

// A tokenized line: SOL, generated tokens, and (when complete) a final EOL.
// T counts everything after SOL, including the EOL.
struct TokenSeq {
    std::vector<int> ids;
    bool complete = false;

    TokenSeq() : ids{Vocab::kSol} {}
    TokenSeq(std::vector<int> ids_, bool complete_);

    size_t length() const { return ids.size() - 1; }  // T
    void push(int id);                                // appends; EOL completes the sequence
    void check() const;
    std::vector<std::string> decode(const Vocab& v) const;
    bool operator==(const TokenSeq&) const = default;
};

LogLine parse_log_line(const std::string& raw);
std::vector<std::string> tokenize(const LogLine& line);
Vocab build_vocab(const Corpus& corpus, size_t min_count);
TokenSeq encode(const Vocab& vocab, const LogLine& line);

// Permutes every column (time included) independently; labels are dropped.
Corpus shuffle_columns(const Corpus& corpus, uint64_t seed);
Corpus sample_fraction(const Corpus& corpus, double fraction, uint64_t seed);

// Parameters of the synthetic authentication-log model. Normal traffic keeps
// each user on a small fixed set of computers; anomalous lines pair users
// with computers outside their profile and occasionally use a rare auth type.
struct SynthSpec {
    size_t n_users = 50;
    size_t n_computers = 100;
    size_t home_comps = 3;   // source computers per user
    size_t dest_comps = 3;   // destination computers per user
    double anomaly_fraction = 0.0;
    double rare_auth_prob = 0.5;  // within anomalies
    double benign_noise = 0.0;    // off-profile destination rate in normal lines
    uint64_t profile_seed = 1;    // fixes the user->computer profiles

    void check() const;
    static SynthSpec from_file(const std::string& path);
};

Corpus synth_corpus(const SynthSpec& spec, size_t n, uint64_t seed);

// File I/O for the external formats: one 9-field line per row, and the
// optional "time,user,src_comp,dst_comp" red-team label file.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);
void apply_redteam_labels(Corpus& corpus, const std::string& redteam_path);
void save_redteam_labels(const Corpus& corpus, const std::string& path);

}  // namespace advlog
