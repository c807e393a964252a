#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace reposcope::py {

enum class TokKind {
    Name,
    Number,
    String,     // any string literal, including triple-quoted and f-strings
    Op,         // operators and punctuation
    Newline,    // end of a logical line
    Indent,
    Dedent,
    EndMarker,
};

struct Token {
    TokKind kind;
    std::string text;   // verbatim lexeme (empty for Newline/Indent/Dedent/EndMarker)
    int line = 0;       // 1-based line of first character
    int col = 0;        // 0-based column (tabs expanded to width 8)
    size_t offset = 0;  // byte offset of the first character in the source
};

struct LexDiagnostic {
    int line;
    std::string message;
};

// Tokenizes Python source into a flat stream with synthesized
// Indent/Dedent/Newline tokens. Newlines inside brackets and after
// backslash continuations are suppressed. Comments are dropped.
// Malformed input is recovered from where possible; a diagnostic is
// recorded per recovery. Throws CorpusError only for input that cannot
// be treated as text (embedded NUL bytes).
std::vector<Token> tokenize(std::string_view source, std::vector<LexDiagnostic>* diags = nullptr);

bool is_keyword(std::string_view name);

}  // namespace reposcope::py
