#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace reposcope {

enum class DeclKind { Class, Function, Attribute };

// A dotted access or invocation, e.g. self.spec_helper.iterate_option_specs()
// becomes {receiver_chain: [self, spec_helper, iterate_option_specs],
// is_invocation: true}.
struct CallSite {
    std::vector<std::string> receiver_chain;
    int line = 0;
    bool is_invocation = false;

    bool empty() const { return receiver_chain.empty(); }
    bool operator==(const CallSite&) const = default;
};

struct Param {
    std::string name;
    std::string annotation;  // verbatim annotation text or empty

    bool operator==(const Param&) const = default;
};

// A local `name = <chain>` statement inside a function body, kept for
// lightweight type propagation when resolving later call sites.
struct LocalBinding {
    std::string name;
    CallSite value;
    int line = 0;

    bool operator==(const LocalBinding&) const = default;
};

struct RawDecl {
    DeclKind kind = DeclKind::Function;
    std::string name;
    std::string qualified_name;  // dotted path within the module
    std::string signature_text;  // verbatim header; decorators included; empty for bare attributes
    std::string docstring;
    std::string annotation_text;  // return annotation (functions) or type annotation (attributes)
    std::string parent;           // qualified name of the enclosing declaration or empty
    int line_start = 0;
    int line_end = 0;
    std::vector<CallSite> body_call_sites;       // functions only
    std::vector<std::string> base_class_names;   // classes only
    std::vector<Param> params;                   // functions only
    CallSite value_chain;                        // attributes: chain of the defining RHS, if any
    std::vector<LocalBinding> local_bindings;    // functions only

    bool operator==(const RawDecl&) const = default;
};

struct ImportDecl {
    std::string imported_name;  // dotted name, or "*" for star imports
    std::string alias;
    std::string source_module;  // dotted module path; leading dots for relative imports
    int line = 0;

    bool operator==(const ImportDecl&) const = default;
};

struct FileModel {
    std::string path;  // normalized repo-relative path, forward slashes
    std::vector<RawDecl> declarations;
    std::vector<ImportDecl> imports;
    std::vector<CallSite> module_call_sites;
    int line_count = 0;

    bool operator==(const FileModel&) const = default;
};

struct Fragment {
    std::string path;
    int start_line = 0;  // 1-based, inclusive
    int end_line = 0;
    std::string text;

    bool operator==(const Fragment&) const = default;
};

struct ParseDiagnostic {
    std::string path;
    int line = 0;
    std::string message;
    bool file_skipped = false;
};

// Parses one Python source file into its language-level model. Recovers
// from malformed constructs where possible; throws CorpusError only for
// unrecoverable input (the caller records the skip and continues).
FileModel parse_file(const std::string& path, std::string_view source,
                     std::vector<ParseDiagnostic>* diags = nullptr);

// Enumerates and parses all .py files under root, lexicographically by
// repo-relative path. Files matching an exclude glob are omitted; files
// with unrecoverable syntax errors are skipped with a diagnostic.
// Throws CorpusError if root does not exist.
std::vector<FileModel> scan_repository(const std::filesystem::path& root,
                                       const std::vector<std::string>& excludes,
                                       std::vector<ParseDiagnostic>* diags = nullptr);

// Sliding-window slicing of a file into fragments at offsets 0, stride,
// 2*stride, ...; the trailing fragment may be shorter than the window.
std::vector<Fragment> slice_fragments(const FileModel& file, std::string_view source,
                                      int window, int stride);

// Glob match used by the repository scanner: '*' and '?' do not cross '/',
// '**' does. Patterns without a '/' are matched against each path component.
bool glob_match(std::string_view pattern, std::string_view path);

std::string read_text_file(const std::filesystem::path& p);

}  // namespace reposcope
