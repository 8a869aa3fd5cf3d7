#include <algorithm>
#include <cctype>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>

#include "sentinel/solidity_model.hpp"
#include "solidity_internal.hpp"

namespace sentinel {

namespace detail {

std::string blank_noncode(const std::string& source, std::vector<bool>* has_code,
                          std::vector<bool>* has_comment) {
    enum class State { Code, LineComment, BlockComment, DQuote, SQuote };
    State state = State::Code;
    std::string out(source.size(), ' ');
    int line_count = 1 + static_cast<int>(std::count(source.begin(), source.end(), '\n'));
    std::vector<bool> code(line_count + 1, false), comment(line_count + 1, false);

    int line = 1;
    for (size_t i = 0; i < source.size(); ++i) {
        char c = source[i];
        char next = i + 1 < source.size() ? source[i + 1] : '\0';
        if (c == '\n') {
            out[i] = '\n';
            if (state == State::LineComment) state = State::Code;
            ++line;
            continue;
        }
        switch (state) {
            case State::Code:
                if (c == '/' && next == '/') {
                    state = State::LineComment;
                    comment[line] = true;
                } else if (c == '/' && next == '*') {
                    state = State::BlockComment;
                    comment[line] = true;
                    ++i;
                } else if (c == '"') {
                    state = State::DQuote;
                    out[i] = '"';
                    code[line] = true;
                } else if (c == '\'') {
                    state = State::SQuote;
                    out[i] = '\'';
                    code[line] = true;
                } else {
                    out[i] = c;
                    if (!std::isspace(static_cast<unsigned char>(c))) code[line] = true;
                }
                break;
            case State::LineComment:
                comment[line] = true;
                break;
            case State::BlockComment:
                comment[line] = true;
                if (c == '*' && next == '/') {
                    state = State::Code;
                    ++i;
                }
                break;
            case State::DQuote:
                if (c == '\\') ++i;
                else if (c == '"') { out[i] = '"'; state = State::Code; }
                break;
            case State::SQuote:
                if (c == '\\') ++i;
                else if (c == '\'') { out[i] = '\''; state = State::Code; }
                break;
        }
    }
    if (has_code) *has_code = code;
    if (has_comment) *has_comment = comment;
    return out;
}

std::vector<Token> tokenize(const std::string& blanked) {
    std::vector<Token> toks;
    int line = 1;
    size_t i = 0;
    auto is_ident = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
    };
    while (i < blanked.size()) {
        char c = blanked[i];
        if (c == '\n') { ++line; ++i; continue; }
        if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
        if (is_ident(c)) {
            size_t j = i;
            while (j < blanked.size() && is_ident(blanked[j])) ++j;
            toks.push_back({blanked.substr(i, j - i), line});
            i = j;
            continue;
        }
        if (c == '=' && i + 1 < blanked.size() && blanked[i + 1] == '>') {
            toks.push_back({"=>", line});
            i += 2;
            continue;
        }
        toks.push_back({std::string(1, c), line});
        ++i;
    }
    return toks;
}

bool is_elementary_type(const std::string& t) {
    if (t == "address" || t == "bool" || t == "string" || t == "byte" || t == "var")
        return true;
    auto prefixed = [&](const char* p) {
        size_t n = std::strlen(p);
        if (t.compare(0, n, p) != 0) return false;
        return std::all_of(t.begin() + n, t.end(),
                           [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    };
    return prefixed("uint") || prefixed("int") || prefixed("bytes") || prefixed("fixed") ||
           prefixed("ufixed");
}

bool is_keyword(const std::string& t) {
    static const std::set<std::string> kw = {
        "if", "else", "for", "while", "do", "return", "returns", "break", "continue",
        "function", "modifier", "event", "struct", "enum", "contract", "interface",
        "library", "abstract", "mapping", "public", "private", "internal", "external",
        "pure", "view", "payable", "constant", "immutable", "virtual", "override",
        "memory", "storage", "calldata", "emit", "new", "delete", "using", "is",
        "pragma", "import", "try", "catch", "assembly", "unchecked", "indexed",
        "anonymous", "constructor", "fallback", "receive", "throw"};
    return kw.count(t) > 0 || is_elementary_type(t);
}

bool is_builtin_call(const std::string& t) {
    static const std::set<std::string> b = {
        "require", "assert", "revert", "keccak256", "sha256", "sha3", "ripemd160",
        "ecrecover", "addmod", "mulmod", "selfdestruct", "suicide", "blockhash",
        "gasleft", "type", "payable", "address"};
    return b.count(t) > 0;
}

int match_bracket(const std::vector<Token>& toks, int open_index) {
    const std::string& open = toks[open_index].text;
    std::string close = open == "(" ? ")" : open == "{" ? "}" : "]";
    int depth = 0;
    for (int i = open_index; i < static_cast<int>(toks.size()); ++i) {
        if (toks[i].text == open) ++depth;
        else if (toks[i].text == close && --depth == 0) return i;
    }
    return -1;
}

}  // namespace detail

namespace {

using detail::Token;

class Parser {
public:
    explicit Parser(const std::string& source) : source_(source) {
        std::vector<bool> has_code, has_comment;
        blanked_ = detail::blank_noncode(source, &has_code, &has_comment);
        toks_ = detail::tokenize(blanked_);

        std::istringstream in(source);
        std::string line;
        while (std::getline(in, line)) model_.source_lines.push_back(line);

        int n = static_cast<int>(model_.source_lines.size());
        model_.comment_only.assign(n + 1, false);
        blank_line_.assign(n + 1, false);
        for (int i = 1; i <= n; ++i) {
            bool code = i < static_cast<int>(has_code.size()) && has_code[i];
            bool comment = i < static_cast<int>(has_comment.size()) && has_comment[i];
            model_.comment_only[i] = comment && !code;
            blank_line_[i] = !comment && !code;
        }
    }

    ContractModel run() {
        parse_top_level();
        attach_leading_comments();
        return std::move(model_);
    }

private:
    const std::string& source_;
    std::string blanked_;
    std::vector<Token> toks_;
    std::vector<bool> blank_line_;
    ContractModel model_;
    int pos_ = 0;

    bool done() const { return pos_ >= static_cast<int>(toks_.size()); }
    const Token& cur() const { return toks_[pos_]; }
    const std::string& tok() const { return toks_[pos_].text; }
    bool at(const std::string& t) const { return !done() && tok() == t; }
    int line() const { return done() ? last_line() : cur().line; }
    int last_line() const { return toks_.empty() ? 1 : toks_.back().line; }

    [[noreturn]] void error(const std::string& msg) const { throw SyntaxError(line(), msg); }

    void expect(const std::string& t) {
        if (!at(t)) error("expected '" + t + "'");
        ++pos_;
    }

    void skip_to(const std::string& t) {
        while (!done() && tok() != t) ++pos_;
        if (!done()) ++pos_;
    }

    // Skips a balanced bracket group starting at the current token.
    void skip_group() {
        int close = detail::match_bracket(toks_, pos_);
        if (close < 0) error("unbalanced '" + tok() + "'");
        pos_ = close + 1;
    }

    void parse_top_level() {
        while (!done()) {
            if (at("pragma")) {
                int start = pos_;
                skip_to(";");
                std::string text;
                for (int i = start + 1; i < pos_ - 1; ++i) {
                    if (!text.empty()) text += " ";
                    text += toks_[i].text;
                }
                if (text.rfind("solidity", 0) == 0)
                    model_.pragma_version = text.substr(std::min<size_t>(9, text.size()));
            } else if (at("import")) {
                skip_to(";");
            } else if (at("abstract") || at("contract") || at("interface") || at("library")) {
                parse_contract();
            } else {
                ++pos_;
            }
        }
        for (const auto& c : model_.contracts)
            if (c.closing_brace == 0)
                throw SyntaxError(c.header.first, "contract '" + c.name + "' is never closed");
    }

    void parse_contract() {
        ContractDecl decl;
        decl.header.first = line();
        if (at("abstract")) {
            decl.kind = ContractKind::Abstract;
            ++pos_;
        } else if (at("interface")) {
            decl.kind = ContractKind::Interface;
        } else if (at("library")) {
            decl.kind = ContractKind::Library;
        }
        ++pos_;  // contract/interface/library keyword
        if (done()) error("truncated contract declaration");
        decl.name = tok();
        ++pos_;
        if (at("is")) {
            ++pos_;
            while (!done() && !at("{")) {
                if (tok() != "," ) {
                    if (std::isalpha(static_cast<unsigned char>(tok()[0])) || tok()[0] == '_') {
                        decl.parents.push_back(tok());
                        ++pos_;
                        if (at("(")) skip_group();  // base constructor args
                        continue;
                    }
                }
                ++pos_;
            }
        }
        if (!at("{")) error("expected '{' after contract declaration");
        decl.header.last = line();
        int close = detail::match_bracket(toks_, pos_);
        if (close < 0) error("unbalanced contract body");
        decl.closing_brace = toks_[close].line;
        int contract_index = static_cast<int>(model_.contracts.size());
        model_.contracts.push_back(decl);

        ++pos_;  // '{'
        while (pos_ < close) parse_member(contract_index, close);
        pos_ = close + 1;
    }

    void parse_member(int contract_index, int contract_close) {
        if (at("function") || at("constructor") || at("fallback") || at("receive")) {
            parse_function(contract_index, false);
        } else if (at("modifier")) {
            parse_function(contract_index, true);
        } else if (at("event")) {
            parse_event(contract_index);
        } else if (at("struct") || at("enum")) {
            ++pos_;
            if (!done()) ++pos_;  // name
            if (at("{")) skip_group();
        } else if (at("using")) {
            ++pos_;
            if (!done()) model_.using_libraries.insert({contract_index, tok()});
            skip_to(";");
        } else if (at("}") || at(";")) {
            ++pos_;
        } else {
            parse_field_or_skip(contract_index, contract_close);
        }
    }

    // Type expression as written: mapping(...), qualified identifier, arrays.
    std::string parse_type() {
        std::string type;
        if (at("mapping")) {
            type = "mapping(";
            ++pos_;
            expect("(");
            type += parse_type();
            expect("=>");
            type += " => " + parse_type();
            expect(")");
            type += ")";
        } else if (at("function")) {
            // function-typed variable; flatten to "function"
            type = "function";
            ++pos_;
            if (at("(")) skip_group();
            while (!done() && (tok() == "internal" || tok() == "external" || tok() == "pure" ||
                               tok() == "view" || tok() == "payable"))
                ++pos_;
            if (at("returns")) {
                ++pos_;
                if (at("(")) skip_group();
            }
        } else {
            if (done()) error("expected type");
            type = tok();
            ++pos_;
            while (at(".")) {
                ++pos_;
                if (done()) error("truncated qualified type");
                type += "." + tok();
                ++pos_;
            }
            if (at("payable")) ++pos_;  // address payable
        }
        while (at("[")) {
            int close = detail::match_bracket(toks_, pos_);
            if (close < 0) error("unbalanced '['");
            type += "[]";
            pos_ = close + 1;
        }
        return type;
    }

    std::vector<SolParam> parse_params() {
        std::vector<SolParam> params;
        expect("(");
        while (!done() && !at(")")) {
            SolParam p;
            p.type = parse_type();
            while (at("memory") || at("calldata") || at("storage") || at("indexed")) ++pos_;
            if (!done() && tok() != "," && tok() != ")") {
                p.name = tok();
                ++pos_;
            }
            params.push_back(p);
            if (at(",")) ++pos_;
        }
        expect(")");
        return params;
    }

    void parse_function(int contract_index, bool is_modifier) {
        FunctionDef fn;
        fn.contract_index = contract_index;
        fn.is_modifier = is_modifier;
        fn.body.first = line();
        ++pos_;  // function / modifier / constructor / fallback / receive
        const std::string& intro = toks_[pos_ - 1].text;
        if (intro == "constructor" || intro == "fallback" || intro == "receive") {
            fn.name = intro;
        } else {
            if (at("(")) {
                fn.name = "";  // pre-0.6 unnamed fallback
            } else {
                fn.name = tok();
                ++pos_;
            }
        }
        if (at("(")) fn.params = parse_params();

        // attribute soup until the body or a bare declaration
        while (!done() && !at("{") && !at(";")) {
            const std::string t = tok();
            if (t == "public") { fn.visibility = Visibility::Public; ++pos_; }
            else if (t == "external") { fn.visibility = Visibility::External; ++pos_; }
            else if (t == "internal") { fn.visibility = Visibility::Internal; ++pos_; }
            else if (t == "private") { fn.visibility = Visibility::Private; ++pos_; }
            else if (t == "view" || t == "pure" || t == "payable" || t == "constant") {
                fn.state_mutability = t == "constant" ? "view" : t;
                ++pos_;
            } else if (t == "virtual") {
                ++pos_;
            } else if (t == "override") {
                ++pos_;
                if (at("(")) skip_group();
            } else if (t == "returns") {
                ++pos_;
                expect("(");
                while (!done() && !at(")")) {
                    std::string rt = parse_type();
                    while (at("memory") || at("calldata") || at("storage")) ++pos_;
                    if (!done() && tok() != "," && tok() != ")") ++pos_;  // named return
                    fn.returns.push_back(rt);
                    if (at(",")) ++pos_;
                }
                expect(")");
            } else if (std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_') {
                fn.modifiers.push_back(t);
                ++pos_;
                if (at("(")) skip_group();  // modifier arguments
            } else {
                ++pos_;
            }
        }
        if (at(";")) {
            fn.has_body = false;
            fn.body.last = line();
            ++pos_;
        } else if (at("{")) {
            int close = detail::match_bracket(toks_, pos_);
            if (close < 0) error("unbalanced function body");
            fn.body.last = toks_[close].line;
            pos_ = close + 1;
        } else {
            error("expected function body or ';'");
        }
        // pre-0.5 style constructor: function named after its contract
        if (fn.name == model_.contracts[contract_index].name) fn.name = "constructor";
        model_.functions.push_back(std::move(fn));
    }

    void parse_event(int contract_index) {
        EventDef ev;
        ev.contract_index = contract_index;
        ev.decl_line = line();
        ++pos_;  // event
        if (done()) error("truncated event declaration");
        ev.name = tok();
        ++pos_;
        expect("(");
        --pos_;  // reuse the param parser, which expects '('
        // events carry indexed flags, so parse inline instead of parse_params
        ++pos_;
        while (!done() && !at(")")) {
            SolEventParam p;
            p.type = parse_type();
            while (at("indexed")) { p.indexed = true; ++pos_; }
            if (!done() && tok() != "," && tok() != ")") {
                p.name = tok();
                ++pos_;
                while (at("indexed")) { p.indexed = true; ++pos_; }
            }
            ev.params.push_back(p);
            if (at(",")) ++pos_;
        }
        expect(")");
        if (at("anonymous")) ++pos_;
        expect(";");
        model_.events.push_back(std::move(ev));
    }

    void parse_field_or_skip(int contract_index, int contract_close) {
        int start = pos_;
        FieldDef field;
        field.contract_index = contract_index;
        field.decl_line = line();
        const std::string first = tok();
        bool plausible_type = first == "mapping" ||
                              detail::is_elementary_type(first) ||
                              std::isalpha(static_cast<unsigned char>(first[0])) ||
                              first[0] == '_';
        if (!plausible_type) {
            ++pos_;
            return;
        }
        try {
            field.type = parse_type();
        } catch (const SyntaxError&) {
            pos_ = start;
            skip_statement(contract_close);
            return;
        }
        while (!done()) {
            const std::string t = tok();
            if (t == "public") { field.visibility = Visibility::Public; ++pos_; }
            else if (t == "private") { field.visibility = Visibility::Private; ++pos_; }
            else if (t == "internal") { field.visibility = Visibility::Internal; ++pos_; }
            else if (t == "constant" || t == "immutable" || t == "override") ++pos_;
            else break;
        }
        if (done() || (!std::isalpha(static_cast<unsigned char>(tok()[0])) && tok()[0] != '_')) {
            pos_ = start;
            skip_statement(contract_close);
            return;
        }
        field.name = tok();
        ++pos_;
        if (at("=")) skip_to(";");
        else if (at(";")) ++pos_;
        else {
            pos_ = start;
            skip_statement(contract_close);
            return;
        }
        model_.fields.push_back(std::move(field));
    }

    void skip_statement(int contract_close) {
        while (pos_ < contract_close && !at(";") && !at("{")) ++pos_;
        if (at("{")) skip_group();
        else if (at(";")) ++pos_;
    }

    void attach_leading_comments() {
        for (auto& fn : model_.functions) {
            int n = static_cast<int>(model_.source_lines.size());
            int cursor = fn.body.first - 1;
            int blanks = 0;
            while (cursor >= 1 && cursor <= n && blank_line_[cursor] && blanks < 1) {
                ++blanks;
                --cursor;
            }
            if (cursor < 1 || !model_.comment_only[cursor]) continue;
            int last = cursor;
            while (cursor >= 1 && model_.comment_only[cursor]) --cursor;
            fn.leading_comment = SourceSpan{cursor + 1, last};
        }
    }
};

}  // namespace

ContractModel parse_contract(const std::string& source) {
    Parser parser(source);
    ContractModel model = parser.run();
    // assembly blocks are kept verbatim but never analyzed
    for (const auto& t : detail::tokenize(detail::blank_noncode(source))) {
        if (t.text == "assembly") {
            model.warnings.push_back("assembly block at line " + std::to_string(t.line) +
                                     " is not analyzed for calls or field references");
            break;
        }
    }
    return model;
}

const FunctionDef* ContractModel::find_function(int contract_index,
                                                const std::string& name) const {
    for (int idx : linearized_scope(contract_index))
        for (const auto& fn : functions)
            if (fn.contract_index == idx && fn.name == name) return &fn;
    return nullptr;
}

std::vector<int> ContractModel::linearized_scope(int contract_index) const {
    std::vector<int> order;
    std::set<int> seen;
    auto find_by_name = [&](const std::string& name) -> int {
        for (size_t i = 0; i < contracts.size(); ++i)
            if (contracts[i].name == name) return static_cast<int>(i);
        return -1;
    };
    std::function<void(int)> visit = [&](int idx) {
        if (idx < 0 || !seen.insert(idx).second) return;
        order.push_back(idx);
        for (const auto& parent : contracts[idx].parents) visit(find_by_name(parent));
    };
    visit(contract_index);
    return order;
}

int ContractModel::main_contract() const {
    if (contracts.empty()) return -1;
    std::set<std::string> inherited;
    for (const auto& c : contracts)
        for (const auto& p : c.parents) inherited.insert(p);
    int best = -1;
    size_t best_ancestors = 0;
    for (size_t i = 0; i < contracts.size(); ++i) {
        if (contracts[i].kind != ContractKind::Contract) continue;
        if (inherited.count(contracts[i].name)) continue;
        size_t ancestors = linearized_scope(static_cast<int>(i)).size();
        if (best < 0 || ancestors >= best_ancestors) {
            best = static_cast<int>(i);
            best_ancestors = ancestors;
        }
    }
    return best >= 0 ? best : static_cast<int>(contracts.size()) - 1;
}

}  // namespace sentinel
