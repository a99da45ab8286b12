#pragma once

#include "pardec/core.hpp"

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pardec {

// One corpus line. A line holding a tab is a prompt/continuation pair; any
// other non-empty line is a plain sequence (prompt holds the tokens).
struct CorpusEntry {
    Tokens prompt;
    Tokens continuation;
    bool   paired = false;
    int    line   = 0;
};

struct Corpus {
    std::string              name;
    std::vector<CorpusEntry> entries;

    std::vector<Tokens> prompts() const;
    // Gold continuations terminated by EoT (paired entries only).
    std::vector<Tokens> references(TokenId eot_id) const;
    // n-gram training sequences: pairs become prompt + continuation + EoT,
    // plain lines are used verbatim.
    std::vector<Tokens> training_sequences(TokenId eot_id) const;
};

// Maps whitespace-separated surface tokens to ids in first-appearance order,
// starting after the reserved ids. Several files may share one builder so that
// they share a vocabulary.
class CorpusReader {
  public:
    CorpusReader();

    // Throws IoError when the file cannot be opened and ParseError (with the
    // line number) on "[MASK]" or a malformed pair line.
    Corpus read_file(const std::filesystem::path & path);
    Corpus read_stream(std::istream & in, std::string name);

    // Tokens must already be known; throws ParseError otherwise.
    Tokens encode(std::string_view text) const;
    // Assigns ids to unseen tokens.
    Tokens encode_extend(std::string_view text, const std::string & where);

    Vocabulary vocabulary() const;

  private:
    std::vector<std::string>                 texts_;
    std::unordered_map<std::string, TokenId> ids_;
};

// Convenience: read one or more corpus files into a shared vocabulary.
// Throws ParseError("empty corpus") if the first file has no entries.
struct LoadedCorpora {
    Vocabulary          vocab;
    std::vector<Corpus> corpora;
};
LoadedCorpora load_corpora(const std::vector<std::filesystem::path> & paths);

}  // namespace pardec
