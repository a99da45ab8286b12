#include "pardec/corpus.hpp"

#include "pardec/errors.hpp"

#include <fstream>
#include <sstream>

namespace pardec {

namespace {

constexpr std::string_view kMaskText = "[MASK]";
constexpr std::string_view kEotText  = "[EoT]";

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t                   i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n')) {
            ++i;
        }
        std::size_t j = i;
        while (j < s.size() && !(s[j] == ' ' || s[j] == '\t' || s[j] == '\r' || s[j] == '\n')) {
            ++j;
        }
        if (j > i) {
            out.push_back(s.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

}  // namespace

std::vector<Tokens> Corpus::prompts() const {
    std::vector<Tokens> out;
    out.reserve(entries.size());
    for (const auto & e : entries) {
        out.push_back(e.prompt);
    }
    return out;
}

std::vector<Tokens> Corpus::references(TokenId eot_id) const {
    std::vector<Tokens> out;
    out.reserve(entries.size());
    for (const auto & e : entries) {
        Tokens r = e.continuation;
        r.push_back(eot_id);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Tokens> Corpus::training_sequences(TokenId eot_id) const {
    std::vector<Tokens> out;
    out.reserve(entries.size());
    for (const auto & e : entries) {
        Tokens s = e.prompt;
        if (e.paired) {
            s.insert(s.end(), e.continuation.begin(), e.continuation.end());
            s.push_back(eot_id);
        }
        out.push_back(std::move(s));
    }
    return out;
}

CorpusReader::CorpusReader() : texts_{std::string(kMaskText), std::string(kEotText)} {
    ids_.emplace(std::string(kEotText), Vocabulary::kDefaultEot);
}

Tokens CorpusReader::encode(std::string_view text) const {
    Tokens out;
    for (auto w : split_ws(text)) {
        auto it = ids_.find(std::string(w));
        if (it == ids_.end()) {
            throw ParseError("unknown token '" + std::string(w) + "'");
        }
        out.push_back(it->second);
    }
    return out;
}

Tokens CorpusReader::encode_extend(std::string_view text, const std::string & where) {
    Tokens out;
    for (auto w : split_ws(text)) {
        if (w == kMaskText) {
            throw ParseError(where + ": the mask token may not appear in a corpus");
        }
        auto [it, inserted] = ids_.try_emplace(std::string(w), static_cast<TokenId>(texts_.size()));
        if (inserted) {
            texts_.emplace_back(w);
        }
        out.push_back(it->second);
    }
    return out;
}

Vocabulary CorpusReader::vocabulary() const {
    return Vocabulary(texts_, Vocabulary::kDefaultMask, Vocabulary::kDefaultEot);
}

Corpus CorpusReader::read_stream(std::istream & in, std::string name) {
    Corpus      corpus;
    std::string line;
    int         lineno = 0;
    corpus.name        = std::move(name);
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = corpus.name + ":" + std::to_string(lineno);
        if (split_ws(line).empty()) {
            continue;
        }
        CorpusEntry e;
        e.line         = lineno;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            e.prompt = encode_extend(line, where);
        } else {
            e.paired       = true;
            e.prompt       = encode_extend(std::string_view(line).substr(0, tab), where);
            e.continuation = encode_extend(std::string_view(line).substr(tab + 1), where);
            if (e.prompt.empty()) {
                throw ParseError(where + ": pair line with an empty prompt");
            }
        }
        corpus.entries.push_back(std::move(e));
    }
    if (in.bad()) {
        throw IoError("read failure in " + corpus.name);
    }
    return corpus;
}

Corpus CorpusReader::read_file(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_stream(in, path.string());
}

LoadedCorpora load_corpora(const std::vector<std::filesystem::path> & paths) {
    CorpusReader  reader;
    LoadedCorpora out{Vocabulary(2), {}};
    for (const auto & p : paths) {
        out.corpora.push_back(reader.read_file(p));
    }
    if (out.corpora.empty() || out.corpora.front().entries.empty()) {
        throw ParseError("empty corpus");
    }
    out.vocab = reader.vocabulary();
    return out;
}

}  // namespace pardec
