#include "advlog/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace advlog {

namespace {

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

}  // namespace

std::string LogLine::to_text() const {
    std::ostringstream os;
    os << time << ',' << src_user << ',' << dst_user << ',' << src_comp << ',' << dst_comp << ','
       << auth_type << ',' << logon_type << ',' << auth_orient << ',' << outcome;
    return os.str();
}

LogLine parse_log_line(const std::string& raw) {
    auto fields = split_commas(raw);
    if (fields.size() != 9)
        throw FieldCountError("expected 9 comma-separated fields, got " +
                              std::to_string(fields.size()));
    int64_t t = 0;
    const std::string& f0 = fields[0];
    size_t i = 0;
    bool neg = !f0.empty() && f0[0] == '-';
    if (neg) i = 1;
    if (i >= f0.size()) throw NonNumericTimeError("time field is not a base-10 integer: " + f0);
    for (; i < f0.size(); ++i) {
        if (f0[i] < '0' || f0[i] > '9')
            throw NonNumericTimeError("time field is not a base-10 integer: " + f0);
        t = t * 10 + (f0[i] - '0');
    }
    if (neg) t = -t;
    LogLine line;
    line.time = t;
    line.src_user = fields[1];
    line.dst_user = fields[2];
    line.src_comp = fields[3];
    line.dst_comp = fields[4];
    line.auth_type = fields[5];
    line.logon_type = fields[6];
    line.auth_orient = fields[7];
    line.outcome = fields[8];
    return line;
}

std::vector<std::string> tokenize(const LogLine& line) {
    return {line.src_user, line.dst_user,   line.src_comp,    line.dst_comp,
            line.auth_type, line.logon_type, line.auth_orient, line.outcome};
}

Vocab::Vocab(std::vector<std::string> tokens, size_t min_count) : min_count_(min_count) {
    id_to_token_ = {kSolText, kEolText, kOovText};
    id_to_token_.insert(id_to_token_.end(), tokens.begin(), tokens.end());
    for (size_t i = 0; i < id_to_token_.size(); ++i)
        token_to_id_[id_to_token_[i]] = static_cast<int>(i);
    if (token_to_id_.size() != id_to_token_.size())
        throw std::invalid_argument("Vocab: duplicate tokens");
}

Vocab build_vocab(const Corpus& corpus, size_t min_count) {
    if (corpus.lines.empty()) throw std::invalid_argument("build_vocab: empty corpus");
    std::unordered_map<std::string, size_t> counts;
    for (const auto& line : corpus.lines)
        for (auto& w : tokenize(line)) ++counts[w];
    std::vector<std::pair<std::string, size_t>> kept;
    for (auto& [tok, c] : counts)
        if (c >= min_count) kept.emplace_back(tok, c);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> tokens;
    tokens.reserve(kept.size());
    for (auto& [tok, c] : kept) tokens.push_back(tok);
    return Vocab(std::move(tokens), min_count);
}

TokenSeq::TokenSeq(std::vector<int> ids_, bool complete_) : ids(std::move(ids_)), complete(complete_) {
    check();
}

void TokenSeq::push(int id) {
    if (complete) throw std::logic_error("TokenSeq::push on a complete sequence");
    if (id == Vocab::kSol) throw std::invalid_argument("TokenSeq::push: SOL only at start");
    ids.push_back(id);
    if (id == Vocab::kEol) complete = true;
}

void TokenSeq::check() const {
    if (ids.empty() || ids[0] != Vocab::kSol)
        throw std::invalid_argument("TokenSeq: must start with SOL");
    size_t eol_count = 0;
    for (size_t i = 1; i < ids.size(); ++i) {
        if (ids[i] == Vocab::kSol) throw std::invalid_argument("TokenSeq: SOL appears after start");
        if (ids[i] == Vocab::kEol) {
            ++eol_count;
            if (i + 1 != ids.size()) throw std::invalid_argument("TokenSeq: EOL not terminal");
        }
    }
    if (complete != (eol_count == 1))
        throw std::invalid_argument("TokenSeq: complete flag inconsistent with EOL");
}

std::vector<std::string> TokenSeq::decode(const Vocab& v) const {
    std::vector<std::string> words;
    for (size_t i = 1; i < ids.size(); ++i) {
        if (ids[i] == Vocab::kEol) break;
        words.push_back(v.token_of(ids[i]));
    }
    return words;
}

TokenSeq encode(const Vocab& vocab, const LogLine& line) {
    TokenSeq seq;
    for (auto& w : tokenize(line)) seq.push(vocab.id_of(w));
    seq.push(Vocab::kEol);
    seq.check();
    return seq;
}

Corpus shuffle_columns(const Corpus& corpus, uint64_t seed) {
    if (corpus.lines.empty()) throw std::invalid_argument("shuffle_columns: empty corpus");
    size_t n = corpus.lines.size();
    Rng rng(seed);
    Corpus out;
    out.lines = corpus.lines;
    auto permute = [&](auto getter) {
        std::vector<size_t> perm(n);
        for (size_t i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        for (size_t i = 0; i < n; ++i) getter(out.lines[i]) = getter(const_cast<LogLine&>(corpus.lines[perm[i]]));
    };
    permute([](LogLine& l) -> int64_t& { return l.time; });
    permute([](LogLine& l) -> std::string& { return l.src_user; });
    permute([](LogLine& l) -> std::string& { return l.dst_user; });
    permute([](LogLine& l) -> std::string& { return l.src_comp; });
    permute([](LogLine& l) -> std::string& { return l.dst_comp; });
    permute([](LogLine& l) -> std::string& { return l.auth_type; });
    permute([](LogLine& l) -> std::string& { return l.logon_type; });
    permute([](LogLine& l) -> std::string& { return l.auth_orient; });
    permute([](LogLine& l) -> std::string& { return l.outcome; });
    return out;
}

Corpus sample_fraction(const Corpus& corpus, double fraction, uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("sample_fraction: fraction must be in (0,1]");
    size_t n = corpus.lines.size();
    size_t k = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
    if (k == 0) throw std::invalid_argument("sample_fraction: rounded sample size is 0");
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(k);
    Corpus out;
    out.lines.reserve(k);
    if (corpus.labels) out.labels.emplace();
    for (size_t i : idx) {
        out.lines.push_back(corpus.lines[i]);
        if (corpus.labels) out.labels->push_back((*corpus.labels)[i]);
    }
    return out;
}

void SynthSpec::check() const {
    if (n_users == 0 || n_computers == 0) throw std::invalid_argument("SynthSpec: empty populations");
    if (anomaly_fraction < 0.0 || anomaly_fraction > 1.0)
        throw std::invalid_argument("SynthSpec: anomaly_fraction outside [0,1]");
    if (benign_noise < 0.0 || benign_noise > 1.0)
        throw std::invalid_argument("SynthSpec: benign_noise outside [0,1]");
    if (home_comps == 0 || dest_comps == 0 || home_comps > n_computers || dest_comps > n_computers)
        throw std::invalid_argument("SynthSpec: bad per-user computer counts");
}

SynthSpec SynthSpec::from_file(const std::string& path) {
    auto kv = parse_kv_file(path);
    SynthSpec s;
    auto get = [&](const char* key, auto& field) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        std::istringstream is(it->second);
        is >> field;
        if (is.fail()) throw std::runtime_error(std::string("SynthSpec: bad value for ") + key);
    };
    get("n_users", s.n_users);
    get("n_computers", s.n_computers);
    get("home_comps", s.home_comps);
    get("dest_comps", s.dest_comps);
    get("anomaly_fraction", s.anomaly_fraction);
    get("rare_auth_prob", s.rare_auth_prob);
    get("benign_noise", s.benign_noise);
    get("profile_seed", s.profile_seed);
    s.check();
    return s;
}

namespace {

// Distinct computer indices per user, fixed by the profile seed.
std::vector<std::vector<size_t>> make_profiles(const SynthSpec& spec, size_t per_user, uint64_t salt) {
    Rng rng(spec.profile_seed ^ salt);
    std::vector<std::vector<size_t>> profiles(spec.n_users);
    for (auto& p : profiles) {
        std::set<size_t> chosen;
        while (chosen.size() < per_user) chosen.insert(rng.uniform_int(spec.n_computers));
        p.assign(chosen.begin(), chosen.end());
    }
    return profiles;
}

const std::vector<std::string> kAuthTypes = {"Krb", "NTLM", "Negotiate"};
const std::vector<double> kAuthWeights = {0.65, 0.30, 0.05};
const std::vector<std::string> kLogonTypes = {"Network", "Service", "Batch"};
const std::vector<double> kLogonWeights = {0.75, 0.20, 0.05};
const std::vector<std::string> kOrients = {"LogOn", "LogOff", "TGS"};
const std::vector<double> kOrientWeights = {0.60, 0.35, 0.05};
const std::vector<std::string> kOutcomes = {"Success", "Fail"};
const std::vector<double> kOutcomeWeights = {0.97, 0.03};

}  // namespace

Corpus synth_corpus(const SynthSpec& spec, size_t n, uint64_t seed) {
    spec.check();
    if (n == 0) throw std::invalid_argument("synth_corpus: n must be >= 1");
    auto home = make_profiles(spec, spec.home_comps, 0x68);
    auto dest = make_profiles(spec, spec.dest_comps, 0x64);
    Rng rng(seed);
    Corpus out;
    out.lines.reserve(n);
    out.labels.emplace();
    out.labels->reserve(n);
    int64_t t = 1;
    for (size_t i = 0; i < n; ++i) {
        bool anomalous = rng.uniform() < spec.anomaly_fraction;
        size_t u = rng.uniform_int(spec.n_users);
        LogLine line;
        line.time = t;
        t += 1 + static_cast<int64_t>(rng.uniform_int(5));
        line.src_user = "U" + std::to_string(u) + "@DOM1";
        line.dst_user = line.src_user;
        if (anomalous) {
            auto off_profile = [&](const std::vector<size_t>& prof) {
                while (true) {
                    size_t c = rng.uniform_int(spec.n_computers);
                    if (std::find(prof.begin(), prof.end(), c) == prof.end()) return c;
                }
            };
            line.src_comp = "C" + std::to_string(off_profile(home[u]));
            line.dst_comp = "C" + std::to_string(off_profile(dest[u]));
            line.auth_type = rng.uniform() < spec.rare_auth_prob
                                 ? "MICROSOFT_AUTH"
                                 : kAuthTypes[rng.categorical(kAuthWeights)];
        } else {
            line.src_comp = "C" + std::to_string(home[u][rng.uniform_int(home[u].size())]);
            // Benign exploration: occasionally visit a destination outside the
            // profile, so normal traffic keeps some irreducible entropy.
            line.dst_comp = rng.uniform() < spec.benign_noise
                                ? "C" + std::to_string(rng.uniform_int(spec.n_computers))
                                : "C" + std::to_string(dest[u][rng.uniform_int(dest[u].size())]);
            line.auth_type = kAuthTypes[rng.categorical(kAuthWeights)];
        }
        line.logon_type = kLogonTypes[rng.categorical(kLogonWeights)];
        line.auth_orient = kOrients[rng.categorical(kOrientWeights)];
        line.outcome = kOutcomes[rng.categorical(kOutcomeWeights)];
        out.lines.push_back(std::move(line));
        out.labels->push_back(anomalous ? 1 : 0);
    }
    return out;
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    Corpus out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.lines.push_back(parse_log_line(line));
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot write " + path);
    for (const auto& l : corpus.lines) outf << l.to_text() << '\n';
}

void apply_redteam_labels(Corpus& corpus, const std::string& redteam_path) {
    std::ifstream in(redteam_path);
    if (!in) throw std::runtime_error("cannot open " + redteam_path);
    std::set<std::string> red;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) red.insert(line);
    }
    corpus.labels.emplace(corpus.lines.size(), 0);
    for (size_t i = 0; i < corpus.lines.size(); ++i) {
        const auto& l = corpus.lines[i];
        std::string key = std::to_string(l.time) + ',' + l.src_user + ',' + l.src_comp + ',' + l.dst_comp;
        if (red.count(key)) (*corpus.labels)[i] = 1;
    }
}

void save_redteam_labels(const Corpus& corpus, const std::string& path) {
    if (!corpus.labels) throw std::invalid_argument("save_redteam_labels: corpus has no labels");
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot write " + path);
    for (size_t i = 0; i < corpus.lines.size(); ++i) {
        if (!(*corpus.labels)[i]) continue;
        const auto& l = corpus.lines[i];
        outf << l.time << ',' << l.src_user << ',' << l.src_comp << ',' << l.dst_comp << '\n';
    }
}

}  // namespace advlog
