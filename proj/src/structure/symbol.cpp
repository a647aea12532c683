#include "sns/structure/symbol.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>
#include <stdexcept>

namespace sns::structure {

struct Symbol::Node {
    SymbolKind kind = SymbolKind::One;
    int i = kWildcard;
    int j = kWildcard;
    MultiIndex k;
    std::vector<Symbol> children;
    std::string key;
    bool canonical = true;
    int hats = 0;
    int leaves = 0;
};

namespace {

std::string index_text(int i) { return i == kWildcard ? "*" : std::to_string(i); }

std::string multi_text(const MultiIndex& k) {
    std::string s = "(";
    for (std::size_t n = 0; n < k.size(); ++n) {
        if (n) s += ' ';
        s += std::to_string(k[n]);
    }
    return s + ")";
}

int lex(const MultiIndex& a, const MultiIndex& b) {
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
    for (std::size_t n = 0; n < a.size(); ++n)
        if (a[n] != b[n]) return a[n] < b[n] ? -1 : 1;
    return 0;
}

}  // namespace

const char* kind_name(SymbolKind k) {
    switch (k) {
        case SymbolKind::One: return "one";
        case SymbolKind::Poly: return "poly";
        case SymbolKind::Xi: return "xi";
        case SymbolKind::XiHat: return "xi-hat";
        case SymbolKind::IntK: return "int-heat";
        case SymbolKind::IntP: return "int-leray";
        case SymbolKind::Prod: return "product";
    }
    return "?";
}

int compare(const Symbol& a, const Symbol& b) {
    if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
    if (a.first_index() != b.first_index()) return a.first_index() < b.first_index() ? -1 : 1;
    if (a.second_index() != b.second_index()) return a.second_index() < b.second_index() ? -1 : 1;
    if (int c = lex(a.multi_index(), b.multi_index())) return c;
    const auto& ca = a.children();
    const auto& cb = b.children();
    if (ca.size() != cb.size()) return ca.size() < cb.size() ? -1 : 1;
    for (std::size_t n = 0; n < ca.size(); ++n)
        if (int c = compare(ca[n], cb[n])) return c;
    return 0;
}

namespace {

std::shared_ptr<Symbol::Node> finish(std::shared_ptr<Symbol::Node> n) {
    std::string& key = n->key;
    switch (n->kind) {
        case SymbolKind::One: key = "1"; break;
        case SymbolKind::Poly: {
            key = "(X";
            for (int v : n->k) key += " " + std::to_string(v);
            key += ")";
            n->canonical = !is_zero(n->k);
            break;
        }
        case SymbolKind::Xi: key = "(Xi " + index_text(n->i) + ")"; break;
        case SymbolKind::XiHat: key = "(XiHat " + index_text(n->i) + ")"; break;
        case SymbolKind::IntK:
            key = "(I " + multi_text(n->k) + " " + n->children[0].key() + ")";
            break;
        case SymbolKind::IntP:
            key = "(I0 " + index_text(n->i) + " " + index_text(n->j) + " " + multi_text(n->k) + " " +
                  n->children[0].key() + ")";
            break;
        case SymbolKind::Prod:
            key = "(*";
            for (const auto& c : n->children) key += " " + c.key();
            key += ")";
            break;
    }
    for (const auto& c : n->children) {
        n->canonical = n->canonical && c.is_canonical();
        n->hats += c.hat_count();
        n->leaves += c.noise_count();
    }
    if (n->kind == SymbolKind::XiHat) n->hats = 1;
    if (n->kind == SymbolKind::Xi || n->kind == SymbolKind::XiHat) n->leaves = 1;
    if (n->kind == SymbolKind::Prod) {
        const auto& ch = n->children;
        if (ch.size() < 2) n->canonical = false;
        int polys = 0;
        for (std::size_t m = 0; m < ch.size(); ++m) {
            auto k = ch[m].kind();
            if (k == SymbolKind::Prod || k == SymbolKind::One) n->canonical = false;
            if (k == SymbolKind::Poly) ++polys;
            if (m && compare(ch[m - 1], ch[m]) > 0) n->canonical = false;
        }
        if (polys > 1) n->canonical = false;
    }
    return n;
}

}  // namespace

Symbol Symbol::one() {
    static const Symbol unit(finish(std::make_shared<Node>()));
    return unit;
}

Symbol Symbol::poly(MultiIndex k) {
    if (is_zero(k)) return one();
    for (int v : k)
        if (v < 0) throw std::invalid_argument("poly: negative exponent");
    auto n = std::make_shared<Node>();
    n->kind = SymbolKind::Poly;
    n->k = std::move(k);
    return Symbol(finish(std::move(n)));
}

Symbol Symbol::xi(int i) {
    auto n = std::make_shared<Node>();
    n->kind = SymbolKind::Xi;
    n->i = i;
    return Symbol(finish(std::move(n)));
}

Symbol Symbol::xi_hat(int i) {
    auto n = std::make_shared<Node>();
    n->kind = SymbolKind::XiHat;
    n->i = i;
    return Symbol(finish(std::move(n)));
}

Symbol Symbol::integral(MultiIndex k, Symbol child) {
    auto n = std::make_shared<Node>();
    n->kind = SymbolKind::IntK;
    n->k = std::move(k);
    n->children.push_back(std::move(child));
    return Symbol(finish(std::move(n)));
}

Symbol Symbol::leray_integral(int i, int j, MultiIndex k, Symbol child) {
    auto n = std::make_shared<Node>();
    n->kind = SymbolKind::IntP;
    n->i = i;
    n->j = j;
    n->k = std::move(k);
    n->children.push_back(std::move(child));
    return Symbol(finish(std::move(n)));
}

Symbol Symbol::product(std::vector<Symbol> factors) {
    std::vector<Symbol> flat;
    std::optional<MultiIndex> poly;
    std::function<void(const Symbol&)> take = [&](const Symbol& f) {
        switch (f.kind()) {
            case SymbolKind::One: return;
            case SymbolKind::Prod:
                for (const auto& c : f.children()) take(c);
                return;
            case SymbolKind::Poly:
                poly = poly ? add(*poly, f.multi_index()) : f.multi_index();
                return;
            default: flat.push_back(f);
        }
    };
    for (const auto& f : factors) take(f);
    if (poly && !is_zero(*poly)) flat.push_back(Symbol::poly(*poly));
    if (flat.empty()) return one();
    if (flat.size() == 1) return flat.front();
    std::sort(flat.begin(), flat.end(), SymbolLess{});
    auto n = std::make_shared<Node>();
    n->kind = SymbolKind::Prod;
    n->children = std::move(flat);
    return Symbol(finish(std::move(n)));
}

Symbol Symbol::unchecked_product(std::vector<Symbol> factors) {
    auto n = std::make_shared<Node>();
    n->kind = SymbolKind::Prod;
    n->children = std::move(factors);
    return Symbol(finish(std::move(n)));
}

SymbolKind Symbol::kind() const { return node_->kind; }
int Symbol::first_index() const { return node_->i; }
int Symbol::second_index() const { return node_->j; }
const MultiIndex& Symbol::multi_index() const { return node_->k; }
const std::vector<Symbol>& Symbol::children() const { return node_->children; }
const std::string& Symbol::key() const { return node_->key; }
bool Symbol::is_canonical() const { return node_->canonical; }
bool Symbol::is_polynomial() const { return kind() == SymbolKind::One || kind() == SymbolKind::Poly; }
int Symbol::hat_count() const { return node_->hats; }
int Symbol::noise_count() const { return node_->leaves; }

bool operator==(const Symbol& a, const Symbol& b) { return a.node_ == b.node_ || a.key() == b.key(); }

std::size_t SymbolHash::operator()(const Symbol& s) const { return std::hash<std::string>{}(s.key()); }

Symbol Symbol::without_hats() const {
    if (hat_count() == 0) return *this;
    switch (kind()) {
        case SymbolKind::XiHat: return xi(first_index());
        case SymbolKind::IntK: return integral(multi_index(), children()[0].without_hats());
        case SymbolKind::IntP:
            return leray_integral(first_index(), second_index(), multi_index(), children()[0].without_hats());
        case SymbolKind::Prod: {
            std::vector<Symbol> f;
            for (const auto& c : children()) f.push_back(c.without_hats());
            return product(std::move(f));
        }
        default: return *this;
    }
}

namespace {

MultiIndex fold(const MultiIndex& k) {
    if (k.size() < 2) return k;
    MultiIndex r(k.size(), 0);
    r[0] = k[0];
    for (std::size_t n = 1; n < k.size(); ++n) r[1] += k[n];
    return r;
}

}  // namespace

Symbol Symbol::shape() const {
    switch (kind()) {
        case SymbolKind::One: return *this;
        case SymbolKind::Poly: return poly(fold(multi_index()));
        case SymbolKind::Xi: return xi(kWildcard);
        case SymbolKind::XiHat: return xi_hat(kWildcard);
        case SymbolKind::IntK: return integral(fold(multi_index()), children()[0].shape());
        case SymbolKind::IntP:
            return leray_integral(kWildcard, kWildcard, fold(multi_index()), children()[0].shape());
        case SymbolKind::Prod: {
            std::vector<Symbol> f;
            for (const auto& c : children()) f.push_back(c.shape());
            return product(std::move(f));
        }
    }
    return *this;
}

// --- parsing ---------------------------------------------------------------

namespace {

struct Reader {
    std::string_view s;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("symbol parse error at " + std::to_string(pos) + ": " + what);
    }
    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool peek(char c) {
        skip();
        return pos < s.size() && s[pos] == c;
    }
    void expect(char c) {
        if (!peek(c)) fail(std::string("expected '") + c + "'");
        ++pos;
    }
    std::string atom() {
        skip();
        std::size_t b = pos;
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '(' &&
               s[pos] != ')')
            ++pos;
        if (b == pos) fail("expected atom");
        return std::string(s.substr(b, pos - b));
    }
    int index() {
        auto a = atom();
        if (a == "*" || a == "_") return kWildcard;
        try {
            return std::stoi(a);
        } catch (...) {
            fail("bad index '" + a + "'");
        }
    }
    MultiIndex multi() {
        expect('(');
        MultiIndex k;
        while (!peek(')')) k.push_back(index());
        expect(')');
        return k;
    }
    Symbol symbol() {
        skip();
        if (!peek('(')) {
            auto a = atom();
            if (a == "1") return Symbol::one();
            fail("unknown atom '" + a + "'");
        }
        expect('(');
        auto head = atom();
        Symbol out = Symbol::one();
        if (head == "X") {
            MultiIndex k;
            while (!peek(')')) k.push_back(index());
            out = Symbol::poly(k);
            if (is_zero(k)) fail("zero polynomial exponent; write 1");
        } else if (head == "Xi") {
            out = Symbol::xi(index());
        } else if (head == "XiHat") {
            out = Symbol::xi_hat(index());
        } else if (head == "I") {
            auto k = multi();
            out = Symbol::integral(k, symbol());
        } else if (head == "I0") {
            int i = index();
            int j = index();
            auto k = multi();
            out = Symbol::leray_integral(i, j, k, symbol());
        } else if (head == "*") {
            std::vector<Symbol> f;
            while (!peek(')')) f.push_back(symbol());
            expect(')');
            return Symbol::unchecked_product(std::move(f));
        } else {
            fail("unknown head '" + head + "'");
        }
        expect(')');
        return out;
    }
};

}  // namespace

Symbol Symbol::parse(std::string_view text) {
    Reader r{text};
    Symbol out = r.symbol();
    r.skip();
    if (r.pos != text.size()) r.fail("trailing input");
    return out;
}

}  // namespace sns::structure
