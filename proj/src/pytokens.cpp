#include "reposcope/pytokens.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

#include "reposcope/errors.hpp"

namespace reposcope::py {

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
           static_cast<unsigned char>(c) >= 0x80;
}

bool is_ident_cont(char c) {
    return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

bool is_string_prefix(std::string_view s) {
    if (s.size() > 3) return false;
    std::string lower;
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    static const std::unordered_set<std::string> prefixes = {
        "r", "b", "u", "f", "rb", "br", "fr", "rf",
    };
    return prefixes.count(lower) > 0;
}

const std::unordered_set<std::string>& keywords() {
    static const std::unordered_set<std::string> kw = {
        "False", "None",  "True",   "and",   "as",     "assert", "async",
        "await", "break", "class",  "continue", "def", "del",    "elif",
        "else",  "except", "finally", "for",  "from",  "global", "if",
        "import", "in",   "is",     "lambda", "nonlocal", "not", "or",
        "pass",  "raise", "return", "try",   "while",  "with",   "yield",
    };
    return kw;
}

// Multi-character operators, longest first so greedy matching works.
const std::array<std::string_view, 24>& multi_ops() {
    static const std::array<std::string_view, 24> ops = {
        "**=", "//=", ">>=", "<<=", "...", "!=", ">=", "<=", "==",
        "->",  "+=",  "-=",  "*=",  "/=",  "%=", "&=", "|=", "^=",
        ">>",  "<<",  "**",  "//",  ":=",  "@=",
    };
    return ops;
}

struct Lexer {
    std::string_view src;
    size_t pos = 0;
    int line = 1;
    int col = 0;
    int bracket_depth = 0;
    bool at_line_start = true;
    std::vector<int> indents{0};
    std::vector<Token> out;
    std::vector<LexDiagnostic>* diags;

    void diag(int at_line, std::string msg) {
        if (diags) diags->push_back({at_line, std::move(msg)});
    }

    char peek(size_t ahead = 0) const {
        return pos + ahead < src.size() ? src[pos + ahead] : '\0';
    }

    void advance() {
        if (pos >= src.size()) return;
        if (src[pos] == '\n') {
            ++line;
            col = 0;
        } else if (src[pos] == '\t') {
            col = (col / 8 + 1) * 8;
        } else {
            ++col;
        }
        ++pos;
    }

    void push(TokKind kind, std::string text, int tline, int tcol, size_t toff) {
        out.push_back({kind, std::move(text), tline, tcol, toff});
    }

    // Measures leading whitespace of the current physical line and emits
    // Indent/Dedent tokens. Blank and comment-only lines are skipped.
    void handle_line_start() {
        while (pos < src.size()) {
            size_t scan = pos;
            int width = 0;
            while (scan < src.size() && (src[scan] == ' ' || src[scan] == '\t')) {
                width = src[scan] == '\t' ? (width / 8 + 1) * 8 : width + 1;
                ++scan;
            }
            if (scan >= src.size()) {
                pos = scan;
                return;
            }
            if (src[scan] == '\n' || src[scan] == '\r' || src[scan] == '#') {
                // Skip to the next physical line.
                while (pos < src.size() && src[pos] != '\n') advance();
                if (pos < src.size()) advance();
                continue;
            }
            while (pos < scan) advance();
            if (width > indents.back()) {
                indents.push_back(width);
                push(TokKind::Indent, "", line, 0, pos);
            } else {
                while (width < indents.back()) {
                    indents.pop_back();
                    push(TokKind::Dedent, "", line, 0, pos);
                }
                if (width != indents.back()) {
                    // Unindent to a level never seen; recover by adopting it.
                    diag(line, "inconsistent dedent");
                    indents.push_back(width);
                }
            }
            return;
        }
    }

    void lex_string(std::string_view prefix, int tline, int tcol, size_t toff) {
        std::string text(prefix);
        const char quote = peek();
        bool triple = peek(1) == quote && peek(2) == quote;
        bool raw = text.find('r') != std::string::npos || text.find('R') != std::string::npos;
        int n = triple ? 3 : 1;
        for (int i = 0; i < n; ++i) {
            text.push_back(peek());
            advance();
        }
        while (pos < src.size()) {
            char c = peek();
            if (!raw && c == '\\') {
                text.push_back(c);
                advance();
                if (pos < src.size()) {
                    text.push_back(peek());
                    advance();
                }
                continue;
            }
            if (raw && c == '\\') {
                // A raw string still cannot end on a backslash-quote.
                text.push_back(c);
                advance();
                if (pos < src.size() && peek() == quote) {
                    text.push_back(peek());
                    advance();
                }
                continue;
            }
            if (c == quote) {
                if (!triple) {
                    text.push_back(c);
                    advance();
                    push(TokKind::String, std::move(text), tline, tcol, toff);
                    return;
                }
                if (peek(1) == quote && peek(2) == quote) {
                    for (int i = 0; i < 3; ++i) {
                        text.push_back(peek());
                        advance();
                    }
                    push(TokKind::String, std::move(text), tline, tcol, toff);
                    return;
                }
                text.push_back(c);
                advance();
                continue;
            }
            if (c == '\n' && !triple) {
                diag(tline, "unterminated string literal");
                push(TokKind::String, std::move(text), tline, tcol, toff);
                return;
            }
            text.push_back(c);
            advance();
        }
        diag(tline, "unterminated string literal at end of file");
        push(TokKind::String, std::move(text), tline, tcol, toff);
    }

    void run() {
        while (pos < src.size()) {
            if (at_line_start && bracket_depth == 0) {
                at_line_start = false;
                handle_line_start();
                if (pos >= src.size()) break;
            }
            const char c = peek();
            const int tline = line;
            const int tcol = col;
            const size_t toff = pos;
            if (c == '\0') throw CorpusError("NUL byte in source");
            if (c == ' ' || c == '\t' || c == '\r') {
                advance();
                continue;
            }
            if (c == '#') {
                while (pos < src.size() && peek() != '\n') advance();
                continue;
            }
            if (c == '\\' && peek(1) == '\n') {
                advance();
                advance();
                continue;
            }
            if (c == '\\' && peek(1) == '\r' && peek(2) == '\n') {
                advance();
                advance();
                advance();
                continue;
            }
            if (c == '\n') {
                advance();
                if (bracket_depth == 0) {
                    if (!out.empty() && out.back().kind != TokKind::Newline &&
                        out.back().kind != TokKind::Indent && out.back().kind != TokKind::Dedent) {
                        push(TokKind::Newline, "", tline, tcol, pos);
                    }
                    at_line_start = true;
                }
                continue;
            }
            if (is_ident_start(c)) {
                std::string name;
                while (pos < src.size() && is_ident_cont(peek())) {
                    name.push_back(peek());
                    advance();
                }
                if ((peek() == '"' || peek() == '\'') && is_string_prefix(name)) {
                    lex_string(name, tline, tcol, toff);
                    continue;
                }
                push(TokKind::Name, std::move(name), tline, tcol, toff);
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                std::string num;
                while (pos < src.size() &&
                       (is_ident_cont(peek()) || peek() == '.' ||
                        ((peek() == '+' || peek() == '-') && num.size() > 0 &&
                         (num.back() == 'e' || num.back() == 'E')))) {
                    num.push_back(peek());
                    advance();
                }
                push(TokKind::Number, std::move(num), tline, tcol, toff);
                continue;
            }
            if (c == '"' || c == '\'') {
                lex_string("", tline, tcol, toff);
                continue;
            }
            if (c == '(' || c == '[' || c == '{') {
                ++bracket_depth;
                push(TokKind::Op, std::string(1, c), tline, tcol, toff);
                advance();
                continue;
            }
            if (c == ')' || c == ']' || c == '}') {
                if (bracket_depth > 0) --bracket_depth;
                push(TokKind::Op, std::string(1, c), tline, tcol, toff);
                advance();
                continue;
            }
            bool matched = false;
            for (std::string_view op : multi_ops()) {
                if (src.substr(pos, op.size()) == op) {
                    push(TokKind::Op, std::string(op), tline, tcol, toff);
                    for (size_t i = 0; i < op.size(); ++i) advance();
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            push(TokKind::Op, std::string(1, c), tline, tcol, toff);
            advance();
        }
        if (!out.empty() && out.back().kind != TokKind::Newline && out.back().kind != TokKind::Dedent &&
            out.back().kind != TokKind::Indent) {
            push(TokKind::Newline, "", line, col, pos);
        }
        while (indents.size() > 1) {
            indents.pop_back();
            push(TokKind::Dedent, "", line, 0, pos);
        }
        push(TokKind::EndMarker, "", line, 0, pos);
    }
};

}  // namespace

std::vector<Token> tokenize(std::string_view source, std::vector<LexDiagnostic>* diags) {
    if (source.find('\0') != std::string_view::npos) {
        throw CorpusError("NUL byte in source");
    }
    Lexer lx;
    lx.src = source;
    lx.diags = diags;
    lx.run();
    return lx.out;
}

bool is_keyword(std::string_view name) {
    return keywords().count(std::string(name)) > 0;
}

}  // namespace reposcope::py
