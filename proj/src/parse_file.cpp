#include <algorithm>
#include <cctype>
#include <map>
#include <optional>

#include "reposcope/errors.hpp"
#include "reposcope/pytokens.hpp"
#include "reposcope/source_model.hpp"

namespace reposcope {

namespace py {
namespace {

using Tokens = std::vector<Token>;

bool is_op(const Token& t, std::string_view text) {
    return t.kind == TokKind::Op && t.text == text;
}

bool is_name(const Token& t, std::string_view text) {
    return t.kind == TokKind::Name && t.text == text;
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Strips quotes (and any r/b/u/f prefix) from a string literal and trims
// surrounding whitespace. Escape sequences are kept verbatim.
std::string unquote(std::string_view lit) {
    size_t b = 0;
    while (b < lit.size() && lit[b] != '"' && lit[b] != '\'') ++b;
    if (b >= lit.size()) return std::string(lit);
    char q = lit[b];
    size_t n = 1;
    if (b + 2 < lit.size() && lit[b + 1] == q && lit[b + 2] == q) n = 3;
    size_t start = b + n;
    size_t end = lit.size();
    if (end >= start + n && lit.substr(end - n, n) == std::string(n, q)) end -= n;
    return trim(lit.substr(start, end - start));
}

struct Parser {
    std::string path;
    std::string_view source;
    Tokens toks;
    size_t i = 0;
    FileModel out;
    std::vector<ParseDiagnostic>* diags;
    int error_count = 0;

    const Token& cur() const { return toks[i]; }
    const Token& peek(size_t ahead = 1) const {
        size_t j = std::min(i + ahead, toks.size() - 1);
        return toks[j];
    }
    void next() {
        if (i + 1 < toks.size()) ++i;
    }
    bool at_end() const { return cur().kind == TokKind::EndMarker; }

    void diag(int line, const std::string& msg) {
        ++error_count;
        if (error_count > 200) throw CorpusError(path + ": too many syntax errors");
        if (diags) diags->push_back({path, line, msg, false});
    }

    std::string slice(size_t from, size_t to) const {
        if (to <= from || from >= source.size()) return "";
        to = std::min(to, source.size());
        return std::string(source.substr(from, to - from));
    }

    // ---- statement-level token collection ------------------------------

    // Collects the current logical line (up to and including Newline) and
    // returns the tokens before the Newline.
    Tokens read_logical_line() {
        Tokens line;
        while (!at_end() && cur().kind != TokKind::Newline && cur().kind != TokKind::Dedent &&
               cur().kind != TokKind::Indent) {
            line.push_back(cur());
            next();
        }
        if (cur().kind == TokKind::Newline) next();
        return line;
    }

    // Skips a suite introduced by an Indent, balancing nested suites.
    void skip_suite() {
        if (cur().kind != TokKind::Indent) return;
        int depth = 0;
        do {
            if (cur().kind == TokKind::Indent) ++depth;
            if (cur().kind == TokKind::Dedent) --depth;
            next();
        } while (!at_end() && depth > 0);
    }

    // ---- call-site extraction ------------------------------------------

    // Appends every dotted name chain in toks[b, e) to sites. Chains
    // starting after '.' or after a closing bracket (subscript/call
    // results) are skipped, as are keyword-argument labels.
    void scan_calls(const Tokens& line, size_t b, size_t e, std::vector<CallSite>* sites) {
        for (size_t j = b; j < e;) {
            const Token& t = line[j];
            if (t.kind != TokKind::Name || is_keyword(t.text)) {
                ++j;
                continue;
            }
            if (j > b && is_op(line[j - 1], ".")) {
                ++j;
                continue;
            }
            CallSite site;
            site.receiver_chain.push_back(t.text);
            site.line = t.line;
            size_t k = j + 1;
            while (k + 1 < e && is_op(line[k], ".") && line[k + 1].kind == TokKind::Name) {
                site.receiver_chain.push_back(line[k + 1].text);
                k += 2;
            }
            site.is_invocation = k < e && is_op(line[k], "(");
            // keyword-argument label: f(key=...) accesses nothing
            bool kwarg = site.receiver_chain.size() == 1 && !site.is_invocation && k < e &&
                         is_op(line[k], "=") && j > b &&
                         (is_op(line[j - 1], "(") || is_op(line[j - 1], ","));
            if (!kwarg) sites->push_back(std::move(site));
            j = k;
        }
    }

    // Parses the leading dotted chain of toks[b, e), if any.
    std::optional<CallSite> leading_chain(const Tokens& line, size_t b, size_t e) {
        if (b >= e || line[b].kind != TokKind::Name || is_keyword(line[b].text)) return std::nullopt;
        CallSite site;
        site.receiver_chain.push_back(line[b].text);
        site.line = line[b].line;
        size_t k = b + 1;
        while (k + 1 < e && is_op(line[k], ".") && line[k + 1].kind == TokKind::Name) {
            site.receiver_chain.push_back(line[k + 1].text);
            k += 2;
        }
        site.is_invocation = k < e && is_op(line[k], "(");
        return site;
    }

    // ---- declarations ----------------------------------------------------

    struct Ctx {
        std::string class_qname;   // enclosing class qualified name, or empty
        RawDecl* function = nullptr;  // innermost RawDecl function, when inside one
        std::string function_class;   // class owning *function*, or empty
    };

    void add_decl(RawDecl decl) {
        auto it = std::find_if(out.declarations.begin(), out.declarations.end(),
                               [&](const RawDecl& d) { return d.qualified_name == decl.qualified_name; });
        if (it == out.declarations.end()) {
            out.declarations.push_back(std::move(decl));
            return;
        }
        if (decl.kind == DeclKind::Attribute && it->kind == DeclKind::Attribute) {
            // Repeated bindings of the same attribute: keep the first, fill gaps.
            if (it->annotation_text.empty()) it->annotation_text = decl.annotation_text;
            if (it->signature_text.empty()) it->signature_text = decl.signature_text;
            if (it->value_chain.empty()) it->value_chain = decl.value_chain;
            return;
        }
        diag(decl.line_start, "redefinition of " + decl.qualified_name);
        *it = std::move(decl);  // later binding wins, as in Python
    }

    RawDecl* find_decl(const std::string& qname) {
        auto it = std::find_if(out.declarations.begin(), out.declarations.end(),
                               [&](const RawDecl& d) { return d.qualified_name == qname; });
        return it == out.declarations.end() ? nullptr : &*it;
    }

    // Returns the docstring if the suite's first statement is a bare string.
    std::string take_docstring() {
        if (cur().kind == TokKind::String &&
            (peek().kind == TokKind::Newline || peek().kind == TokKind::Dedent ||
             peek().kind == TokKind::EndMarker)) {
            std::string doc = unquote(cur().text);
            next();
            if (cur().kind == TokKind::Newline) next();
            return doc;
        }
        return "";
    }

    void parse_import_stmt(const Tokens& line) {
        if (line.empty()) return;
        size_t j = 0;
        auto read_dotted = [&](size_t* k) {
            std::string name;
            while (*k < line.size() &&
                   (line[*k].kind == TokKind::Name || is_op(line[*k], ".") || is_op(line[*k], "..."))) {
                if (line[*k].kind == TokKind::Name && is_keyword(line[*k].text)) break;
                name += line[*k].text;
                ++*k;
            }
            return name;
        };
        if (is_name(line[0], "import")) {
            j = 1;
            while (j < line.size()) {
                std::string mod = read_dotted(&j);
                if (mod.empty()) break;
                std::string alias;
                if (j < line.size() && is_name(line[j], "as") && j + 1 < line.size()) {
                    alias = line[j + 1].text;
                    j += 2;
                }
                out.imports.push_back({mod, alias, mod, line[0].line});
                if (j < line.size() && is_op(line[j], ",")) ++j;
            }
            return;
        }
        if (is_name(line[0], "from")) {
            j = 1;
            std::string mod = read_dotted(&j);
            if (j >= line.size() || !is_name(line[j], "import")) {
                diag(line[0].line, "malformed from-import");
                return;
            }
            ++j;
            while (j < line.size()) {
                if (is_op(line[j], "(") || is_op(line[j], ")") || is_op(line[j], ",")) {
                    ++j;
                    continue;
                }
                if (is_op(line[j], "*")) {
                    out.imports.push_back({"*", "", mod, line[0].line});
                    ++j;
                    continue;
                }
                if (line[j].kind != TokKind::Name) {
                    ++j;
                    continue;
                }
                std::string name = line[j].text;
                ++j;
                std::string alias;
                if (j < line.size() && is_name(line[j], "as") && j + 1 < line.size()) {
                    alias = line[j + 1].text;
                    j += 2;
                }
                out.imports.push_back({name, alias, mod, line[0].line});
            }
        }
    }

    // Parses `class NAME [(bases)]:` starting at the `class` keyword.
    // header_off is the slice start (first decorator or the keyword itself).
    void parse_class(const Ctx& ctx, size_t header_off) {
        const int start_line = cur().line;
        next();  // class
        if (cur().kind != TokKind::Name) {
            diag(start_line, "class without a name");
            read_logical_line();
            if (cur().kind == TokKind::Indent) skip_suite();
            return;
        }
        RawDecl decl;
        decl.kind = DeclKind::Class;
        decl.name = cur().text;
        decl.qualified_name = ctx.class_qname.empty() ? decl.name : ctx.class_qname + "." + decl.name;
        decl.parent = ctx.class_qname;
        decl.line_start = start_line;
        next();
        if (is_op(cur(), "(")) {
            int depth = 0;
            Tokens inside;
            do {
                if (is_op(cur(), "(") || is_op(cur(), "[") || is_op(cur(), "{")) ++depth;
                if (is_op(cur(), ")") || is_op(cur(), "]") || is_op(cur(), "}")) --depth;
                if (depth > 0 || !is_op(cur(), ")")) inside.push_back(cur());
                next();
            } while (!at_end() && depth > 0);
            // base names: dotted chains at depth 1, skipping keyword args
            size_t j = 1;  // skip the '('
            int d = 0;
            while (j < inside.size()) {
                const Token& t = inside[j];
                if (is_op(t, "(") || is_op(t, "[") || is_op(t, "{")) ++d;
                if (is_op(t, ")") || is_op(t, "]") || is_op(t, "}")) --d;
                if (d == 0 && t.kind == TokKind::Name && !is_keyword(t.text) &&
                    (j == 1 || is_op(inside[j - 1], ",") || is_op(inside[j - 1], "("))) {
                    std::string base = t.text;
                    size_t k = j + 1;
                    while (k + 1 < inside.size() && is_op(inside[k], ".") &&
                           inside[k + 1].kind == TokKind::Name) {
                        base += "." + inside[k + 1].text;
                        k += 2;
                    }
                    if (k < inside.size() && is_op(inside[k], "=")) {
                        j = k + 1;  // metaclass=... or other keyword argument
                        continue;
                    }
                    decl.base_class_names.push_back(base);
                    j = k;
                    continue;
                }
                ++j;
            }
        }
        size_t colon_off = cur().offset;
        if (is_op(cur(), ":")) {
            next();
        } else {
            diag(start_line, "class header missing ':'");
            Tokens rest = read_logical_line();
            colon_off = rest.empty() ? cur().offset : rest.front().offset;
        }
        decl.signature_text = trim(slice(header_off, colon_off));
        if (cur().kind == TokKind::Newline) next();
        int end_line = start_line;
        if (cur().kind == TokKind::Indent) {
            next();
            decl.docstring = take_docstring();
            Ctx inner = ctx;
            inner.class_qname = decl.qualified_name;
            end_line = parse_block(inner);
        } else {
            // one-line class body
            Tokens rest = read_logical_line();
            if (!rest.empty() && rest[0].kind == TokKind::String) decl.docstring = unquote(rest[0].text);
            end_line = rest.empty() ? start_line : rest.back().line;
        }
        decl.line_end = std::max(end_line, start_line);
        add_decl(std::move(decl));
    }

    // Parses `def NAME(params) [-> ann]:` starting at `def` (or `async`).
    void parse_function(const Ctx& ctx, size_t header_off) {
        const int start_line = cur().line;
        if (is_name(cur(), "async")) next();
        next();  // def
        if (cur().kind != TokKind::Name) {
            diag(start_line, "def without a name");
            read_logical_line();
            if (cur().kind == TokKind::Indent) skip_suite();
            return;
        }
        const bool nested_in_function = ctx.function != nullptr;
        RawDecl decl;
        decl.kind = DeclKind::Function;
        decl.name = cur().text;
        decl.qualified_name = ctx.class_qname.empty() ? decl.name : ctx.class_qname + "." + decl.name;
        decl.parent = ctx.class_qname;
        decl.line_start = start_line;
        next();
        if (is_op(cur(), "(")) {
            int depth = 0;
            Tokens inside;
            do {
                if (is_op(cur(), "(") || is_op(cur(), "[") || is_op(cur(), "{")) ++depth;
                if (is_op(cur(), ")") || is_op(cur(), "]") || is_op(cur(), "}")) --depth;
                inside.push_back(cur());
                next();
            } while (!at_end() && depth > 0);
            parse_params(inside, &decl);
        } else {
            diag(start_line, "def header missing parameter list");
        }
        if (is_op(cur(), "->")) {
            next();
            size_t ann_begin = cur().offset;
            int depth = 0;
            while (!at_end() && !(depth == 0 && is_op(cur(), ":")) && cur().kind != TokKind::Newline) {
                if (is_op(cur(), "(") || is_op(cur(), "[") || is_op(cur(), "{")) ++depth;
                if (is_op(cur(), ")") || is_op(cur(), "]") || is_op(cur(), "}")) --depth;
                next();
            }
            decl.annotation_text = trim(slice(ann_begin, cur().offset));
        }
        size_t colon_off = cur().offset;
        if (is_op(cur(), ":")) {
            next();
        } else {
            diag(start_line, "def header missing ':'");
        }
        decl.signature_text = trim(slice(header_off, colon_off));
        if (cur().kind == TokKind::Newline) next();
        int end_line = start_line;
        RawDecl* sink = nested_in_function ? ctx.function : &decl;
        if (cur().kind == TokKind::Indent) {
            next();
            if (!nested_in_function) decl.docstring = take_docstring();
            Ctx inner;
            inner.class_qname = "";  // declarations inside a function body are not members
            inner.function = sink;
            inner.function_class = nested_in_function ? ctx.function_class : ctx.class_qname;
            end_line = parse_block(inner);
        } else {
            Tokens rest = read_logical_line();
            if (!rest.empty()) {
                if (rest[0].kind == TokKind::String && !nested_in_function) {
                    decl.docstring = unquote(rest[0].text);
                } else {
                    scan_calls(rest, 0, rest.size(), &sink->body_call_sites);
                }
                end_line = rest.back().line;
            }
        }
        decl.line_end = std::max(end_line, start_line);
        if (!nested_in_function) add_decl(std::move(decl));
        // a nested def contributes only its call sites, already attached
    }

    void parse_params(const Tokens& inside, RawDecl* decl) {
        // inside = '(' ... ')'
        size_t j = 1;
        int depth = 0;
        while (j + 1 < inside.size()) {
            const Token& t = inside[j];
            if (is_op(t, "(") || is_op(t, "[") || is_op(t, "{")) {
                ++depth;
                ++j;
                continue;
            }
            if (is_op(t, ")") || is_op(t, "]") || is_op(t, "}")) {
                --depth;
                ++j;
                continue;
            }
            if (depth == 0 && t.kind == TokKind::Name && !is_keyword(t.text) &&
                (j == 1 || is_op(inside[j - 1], ",") || is_op(inside[j - 1], "*") ||
                 is_op(inside[j - 1], "**"))) {
                Param p;
                p.name = t.text;
                size_t k = j + 1;
                if (k + 1 < inside.size() && is_op(inside[k], ":")) {
                    size_t ann_begin = inside[k + 1].offset;
                    ++k;
                    int d = 0;
                    while (k + 1 < inside.size() &&
                           !(d == 0 && (is_op(inside[k], ",") || is_op(inside[k], "=")))) {
                        if (is_op(inside[k], "(") || is_op(inside[k], "[") || is_op(inside[k], "{")) ++d;
                        if (is_op(inside[k], ")") || is_op(inside[k], "]") || is_op(inside[k], "}")) --d;
                        ++k;
                    }
                    p.annotation = trim(slice(ann_begin, inside[k].offset));
                }
                decl->params.push_back(std::move(p));
                j = k;
                continue;
            }
            ++j;
        }
    }

    // Handles one plain statement line within ctx. Extracts call sites,
    // attribute declarations, and local bindings.
    void handle_statement_line(const Tokens& line, const Ctx& ctx) {
        if (line.empty()) return;
        std::vector<CallSite>* sink =
            ctx.function ? &ctx.function->body_call_sites : &out.module_call_sites;

        // find a top-level '=' (plain assignment)
        size_t eq = line.size();
        int depth = 0;
        for (size_t j = 0; j < line.size(); ++j) {
            if (is_op(line[j], "(") || is_op(line[j], "[") || is_op(line[j], "{")) ++depth;
            if (is_op(line[j], ")") || is_op(line[j], "]") || is_op(line[j], "}")) --depth;
            if (depth == 0 && is_op(line[j], "=")) {
                eq = j;
                break;
            }
        }
        // find a top-level ':' before '=' (annotation)
        size_t colon = eq;
        depth = 0;
        for (size_t j = 0; j < eq && j < line.size(); ++j) {
            if (is_op(line[j], "(") || is_op(line[j], "[") || is_op(line[j], "{")) ++depth;
            if (is_op(line[j], ")") || is_op(line[j], "]") || is_op(line[j], "}")) --depth;
            if (depth == 0 && is_op(line[j], ":")) {
                colon = j;
                break;
            }
        }
        const bool has_assign = eq < line.size();
        const bool has_ann = colon < eq;
        const size_t lhs_end = has_ann ? colon : eq;
        const size_t rhs_begin = has_assign ? eq + 1 : line.size();

        auto rhs_chain = [&]() {
            auto c = leading_chain(line, rhs_begin, line.size());
            return c ? *c : CallSite{};
        };

        // self.NAME [: ann] [= rhs] inside a method
        if (ctx.function && !ctx.function_class.empty() && lhs_end == 3 && is_name(line[0], "self") &&
            is_op(line[1], ".") && line[2].kind == TokKind::Name && (has_assign || has_ann)) {
            RawDecl attr;
            attr.kind = DeclKind::Attribute;
            attr.name = line[2].text;
            attr.qualified_name = ctx.function_class + "." + attr.name;
            attr.parent = ctx.function_class;
            attr.line_start = attr.line_end = line[0].line;
            if (has_ann) {
                attr.annotation_text =
                    trim(slice(line[colon + 1].offset, line[eq < line.size() ? eq : line.size() - 1].offset +
                                                           (eq < line.size() ? 0 : line.back().text.size())));
                if (has_assign)
                    attr.annotation_text = trim(slice(line[colon + 1].offset, line[eq].offset));
                attr.signature_text = trim(slice(line[0].offset, statement_end_offset(line)));
            }
            if (has_assign) attr.value_chain = rhs_chain();
            add_decl(std::move(attr));
            if (has_assign) scan_calls(line, rhs_begin, line.size(), sink);
            if (has_ann) scan_calls(line, colon + 1, eq, sink);
            return;
        }

        // NAME : ann [= rhs] in a class body (annotated attribute)
        if (!ctx.function && !ctx.class_qname.empty() && has_ann && lhs_end == 1 &&
            line[0].kind == TokKind::Name && !is_keyword(line[0].text)) {
            RawDecl attr;
            attr.kind = DeclKind::Attribute;
            attr.name = line[0].text;
            attr.qualified_name = ctx.class_qname + "." + attr.name;
            attr.parent = ctx.class_qname;
            attr.line_start = attr.line_end = line[0].line;
            attr.annotation_text = has_assign ? trim(slice(line[colon + 1].offset, line[eq].offset))
                                              : trim(slice(line[colon + 1].offset, statement_end_offset(line)));
            attr.signature_text = trim(slice(line[0].offset, statement_end_offset(line)));
            if (has_assign) attr.value_chain = rhs_chain();
            add_decl(std::move(attr));
            if (has_assign) scan_calls(line, rhs_begin, line.size(), sink);
            return;
        }

        // NAME [= rhs] inside a function (local binding for type propagation)
        if (ctx.function && has_assign && lhs_end == 1 && line[0].kind == TokKind::Name &&
            !is_keyword(line[0].text)) {
            CallSite value = rhs_chain();
            if (!value.empty()) {
                ctx.function->local_bindings.push_back({line[0].text, value, line[0].line});
            }
            scan_calls(line, rhs_begin, line.size(), sink);
            if (has_ann) scan_calls(line, colon + 1, eq, sink);
            return;
        }

        if (has_assign) {
            // tuple targets, subscripts, chained assignments: scan RHS only
            scan_calls(line, rhs_begin, line.size(), sink);
            return;
        }
        scan_calls(line, 0, line.size(), sink);
    }

    size_t statement_end_offset(const Tokens& line) const {
        const Token& last = line.back();
        return last.offset + last.text.size();
    }

    // Parses statements until the matching Dedent. Returns the last line
    // consumed.
    int parse_block(const Ctx& ctx) {
        int last_line = cur().line;
        size_t pending_decorator_off = std::string::npos;
        while (!at_end()) {
            if (cur().kind == TokKind::Dedent) {
                next();
                return last_line;
            }
            if (cur().kind == TokKind::Indent) {
                // unexpected indent: treat as an anonymous suite
                diag(cur().line, "unexpected indent");
                next();
                last_line = parse_block(ctx);
                continue;
            }
            if (cur().kind == TokKind::Newline) {
                next();
                continue;
            }
            if (is_op(cur(), "@")) {
                if (pending_decorator_off == std::string::npos) pending_decorator_off = cur().offset;
                Tokens deco = read_logical_line();
                if (!deco.empty()) last_line = deco.back().line;
                continue;
            }
            size_t header_off = pending_decorator_off != std::string::npos ? pending_decorator_off
                                                                           : cur().offset;
            if (is_name(cur(), "class") && !ctx.function) {
                pending_decorator_off = std::string::npos;
                parse_class(ctx, header_off);
                last_line = toks[i > 0 ? i - 1 : 0].line;
                continue;
            }
            if (is_name(cur(), "def") || (is_name(cur(), "async") && is_name(peek(), "def"))) {
                pending_decorator_off = std::string::npos;
                parse_function(ctx, header_off);
                last_line = toks[i > 0 ? i - 1 : 0].line;
                continue;
            }
            if (is_name(cur(), "class") && ctx.function) {
                // class defined inside a function: not a declaration, but
                // its call sites belong to the enclosing function
                pending_decorator_off = std::string::npos;
                read_logical_line();
                if (cur().kind == TokKind::Indent) {
                    next();
                    last_line = parse_block(ctx);
                }
                continue;
            }
            pending_decorator_off = std::string::npos;
            if (is_name(cur(), "import") || is_name(cur(), "from")) {
                Tokens line = read_logical_line();
                parse_import_stmt(line);
                if (!line.empty()) last_line = line.back().line;
                continue;
            }
            Tokens line = read_logical_line();
            if (!line.empty()) {
                handle_statement_line(line, ctx);
                last_line = line.back().line;
            }
            if (cur().kind == TokKind::Indent) {
                // suite of a compound statement (if/for/while/try/with/...)
                next();
                last_line = parse_block(ctx);
            }
        }
        return last_line;
    }

    void run() {
        Ctx module_ctx;
        parse_block(module_ctx);
    }
};

}  // namespace
}  // namespace py

FileModel parse_file(const std::string& path, std::string_view source,
                     std::vector<ParseDiagnostic>* diags) {
    py::Parser p;
    p.path = path;
    p.source = source;
    std::vector<py::LexDiagnostic> lex_diags;
    p.toks = py::tokenize(source, &lex_diags);
    p.diags = diags;
    if (diags) {
        for (auto& d : lex_diags) diags->push_back({path, d.line, d.message, false});
    }
    p.out.path = path;
    p.out.line_count = static_cast<int>(std::count(source.begin(), source.end(), '\n'));
    if (!source.empty() && source.back() != '\n') ++p.out.line_count;
    p.run();
    return p.out;
}

}  // namespace reposcope
