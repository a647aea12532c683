#include "sns/structure/structure.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace sns::structure {

Rational StructureSpec::min_factor_degree() const {
    Rational m(0);
    m = std::min(m, alpha + 2);
    m = std::min(m, 2 * alpha + 5);
    return m;
}

Rational StructureSpec::factor_cut() const { return gamma_cut - min_factor_degree(); }

void StructureSpec::validate() const {
    const int d = scaling.d;
    if (scaling.s0 < 1) throw StructureError("scaling: s0 must be >= 1");
    if (d == 3) {
        if (!(alpha > Rational(-13, 5) && alpha < Rational(-5, 2)))
            throw StructureError("alpha must lie in (-13/5, -5/2) for d=3, got " + to_string(alpha));
    } else if (d == 2) {
        if (!(alpha > Rational(-5, 2) && alpha < Rational(-2)))
            throw StructureError("alpha must lie in (-5/2, -2) for d=2, got " + to_string(alpha));
    } else {
        throw StructureError("spatial dimension must be 2 or 3, got " + std::to_string(d));
    }
    if (kappa <= 0) throw StructureError("kappa must be > 0");
    if (kappa >= -alpha) throw StructureError("kappa must be < -alpha");
    if (gamma_cut <= 0) throw StructureError("gamma_cut must be > 0 (below the degree of 1 nothing survives)");
    if (max_levels < 0) throw StructureError("max_levels must be >= 0");
}

namespace {

Rational degree_unchecked(const Symbol& t, const StructureSpec& spec) {
    switch (t.kind()) {
        case SymbolKind::One: return Rational(0);
        case SymbolKind::Poly: return Rational(index_weight(t.multi_index(), spec.scaling));
        case SymbolKind::Xi: return spec.alpha;
        case SymbolKind::XiHat: return -spec.kappa;
        case SymbolKind::IntK:
            return degree_unchecked(t.children()[0], spec) + 2 - index_weight(t.multi_index(), spec.scaling);
        case SymbolKind::IntP:
            return degree_unchecked(t.children()[0], spec) - index_weight(t.multi_index(), spec.scaling);
        case SymbolKind::Prod: {
            Rational s(0);
            for (const auto& c : t.children()) s += degree_unchecked(c, spec);
            return s;
        }
    }
    return Rational(0);
}

}  // namespace

Rational degree(const Symbol& tau, const StructureSpec& spec) {
    if (!tau.is_canonical()) throw StructureError("degree: non-canonical symbol " + tau.key());
    return degree_unchecked(tau, spec);
}

std::string to_string(const SetTag& t) {
    auto idx = [](int i) { return i == kWildcard ? std::string("*") : std::to_string(i); };
    switch (t.kind) {
        case SetKind::Poly: return "Poly";
        case SetKind::W: return "W[" + idx(t.i) + "," + idx(t.j) + "]";
        case SetKind::P: return "P[" + idx(t.i) + "]";
        case SetKind::U: return "U";
    }
    return "?";
}

bool BasisEntry::in_model_space() const {
    for (const auto& t : tags)
        if (t.kind != SetKind::P) return true;
    return false;
}

std::optional<std::size_t> GradedBasis::find(const Symbol& s) const {
    // entries are sorted by (degree, symbol)
    auto d = degree(s, spec);
    auto it = std::lower_bound(entries.begin(), entries.end(), std::make_pair(d, s),
                               [](const BasisEntry& e, const std::pair<Rational, Symbol>& v) {
                                   if (e.degree != v.first) return e.degree < v.first;
                                   return compare(e.symbol, v.second) < 0;
                               });
    if (it != entries.end() && it->symbol == s) return static_cast<std::size_t>(it - entries.begin());
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// The recursive construction.

namespace {

struct IdSet {
    std::vector<int> items;
    std::unordered_set<int> members;
    bool insert(int id) {
        if (!members.insert(id).second) return false;
        items.push_back(id);
        return true;
    }
    bool contains(int id) const { return members.count(id) != 0; }
};

class Builder {
public:
    Builder(const StructureSpec& spec, bool hats) : spec_(spec), hats_(hats) {
        const int d = spec.scaling.d;
        if (spec.index_mode == IndexMode::Shape) {
            range_ = {kWildcard};
        } else {
            for (int i = 1; i <= d; ++i) range_.push_back(i);
        }
        r_ = static_cast<int>(range_.size());
    }

    GradedBasis run();

private:
    int slot(int i) const { return spec_.index_mode == IndexMode::Shape ? 0 : i - 1; }
    int pair(int i, int j) const { return slot(i) * r_ + slot(j); }
    MultiIndex derivative(int i2) const {
        return unit_index(spec_.scaling.d, spec_.index_mode == IndexMode::Shape ? 1 : i2);
    }

    int intern(const Symbol& s, const Rational& deg, int level) {
        auto [it, fresh] = ids_.emplace(s.key(), static_cast<int>(symbols_.size()));
        if (fresh) {
            symbols_.push_back(s);
            degrees_.push_back(deg);
            levels_.push_back(level);
            tags_.emplace_back();
        }
        return it->second;
    }
    void tag(int id, SetTag t) {
        auto& v = tags_[static_cast<std::size_t>(id)];
        if (std::find(v.begin(), v.end(), t) == v.end()) v.push_back(t);
    }
    const Rational& deg(int id) const { return degrees_[static_cast<std::size_t>(id)]; }

    void enumerate_polys();

    const StructureSpec& spec_;
    bool hats_;
    std::vector<int> range_;
    int r_ = 1;

    std::unordered_map<std::string, int> ids_;
    std::vector<Symbol> symbols_;
    std::vector<Rational> degrees_;
    std::vector<int> levels_;
    std::vector<std::vector<SetTag>> tags_;

    std::vector<int> polys_;  // below the factor cut, including 1
};

void Builder::enumerate_polys() {
    const int d = spec_.scaling.d;
    const Rational cut = spec_.factor_cut();
    // weights are bounded by the cut; walk all multi-indices of bounded weight
    const int wmax = static_cast<int>(boost::rational_cast<double>(cut)) + 1;
    std::vector<MultiIndex> all;
    const int len = spec_.index_mode == IndexMode::Shape ? 2 : d + 1;
    MultiIndex k(static_cast<std::size_t>(len), 0);
    std::function<void(int, int)> rec = [&](int axis, int used) {
        if (axis == len) {
            all.push_back(k);
            return;
        }
        int w = axis == 0 ? spec_.scaling.s0 : 1;
        for (int e = 0; used + e * w <= wmax; ++e) {
            k[static_cast<std::size_t>(axis)] = e;
            rec(axis + 1, used + e * w);
        }
        k[static_cast<std::size_t>(axis)] = 0;
    };
    rec(0, 0);
    for (auto& m : all) {
        MultiIndex full = zero_index(d);
        for (std::size_t a = 0; a < m.size(); ++a) full[a] = m[a];
        Symbol s = Symbol::poly(full);
        Rational dg(index_weight(full, spec_.scaling));
        if (dg >= cut) continue;
        int id = intern(s, dg, 0);
        polys_.push_back(id);
        if (dg < spec_.gamma_cut) tag(id, {SetKind::Poly});
    }
}

GradedBasis Builder::run() {
    spec_.validate();
    const int d = spec_.scaling.d;
    const Rational gamma = spec_.gamma_cut;
    const Rational pcut = spec_.factor_cut();

    enumerate_polys();
    const int unit = ids_.at(Symbol::one().key());

    // I^{i a}(Xi_a), and the hatted variants when extending
    std::vector<std::vector<int>> noise_factor(static_cast<std::size_t>(r_));
    for (int i : range_) {
        for (int a : range_) {
            std::vector<Symbol> leaves{Symbol::xi(a)};
            if (hats_) leaves.push_back(Symbol::xi_hat(a));
            for (const auto& leaf : leaves) {
                Symbol s = Symbol::leray_integral(i, a, zero_index(d), Symbol::integral(zero_index(d), leaf));
                noise_factor[static_cast<std::size_t>(slot(i))].push_back(intern(s, degree_unchecked(s, spec_), 0));
            }
        }
    }

    const std::size_t npairs = static_cast<std::size_t>(r_ * r_);
    std::vector<IdSet> W(npairs), P(static_cast<std::size_t>(r_));
    IdSet U;

    GradedBasis out;
    out.spec = spec_;
    out.shift_extended = hats_;

    bool changed = true;
    int level = 0;
    std::vector<std::pair<int, SetKind>> added_last;
    for (level = 1; level <= spec_.max_levels; ++level) {
        // factor sets from level-1 P's; 1 is always available
        std::vector<std::vector<int>> F(static_cast<std::size_t>(r_));
        for (int i : range_) {
            auto& f = F[static_cast<std::size_t>(slot(i))];
            std::unordered_set<int> seen;
            auto push = [&](int id) {
                if (seen.insert(id).second) f.push_back(id);
            };
            push(unit);
            for (int id : noise_factor[static_cast<std::size_t>(slot(i))]) push(id);
            for (int id : P[static_cast<std::size_t>(slot(i))].items) push(id);
            std::sort(f.begin(), f.end(), [&](int a, int b) { return deg(a) < deg(b); });
        }

        std::vector<std::pair<int, int>> newW;  // (pair, id)
        std::vector<std::pair<int, int>> newP;
        std::vector<int> newU;

        for (int i : range_) {
            for (int j : range_) {
                const auto& Fi = F[static_cast<std::size_t>(slot(i))];
                const auto& Fj = F[static_cast<std::size_t>(slot(j))];
                const int pij = pair(i, j);
                for (int a : Fi) {
                    if (deg(a) + deg(Fj.front()) >= gamma) break;
                    for (int b : Fj) {
                        Rational dg = deg(a) + deg(b);
                        if (dg >= gamma) break;
                        if (i == j && b < a && spec_.index_mode == IndexMode::Shape) continue;
                        Symbol s = Symbol::product({symbols_[static_cast<std::size_t>(a)],
                                                    symbols_[static_cast<std::size_t>(b)]});
                        int id = intern(s, dg, level);
                        if (!W[static_cast<std::size_t>(pij)].contains(id)) newW.emplace_back(pij, id);
                    }
                }
            }
        }

        for (int i1 : range_) {
            for (int i2 : range_) {
                for (int tid : W[static_cast<std::size_t>(pair(i1, i2))].items) {
                    const Symbol& tau = symbols_[static_cast<std::size_t>(tid)];
                    if (tau.is_polynomial()) continue;  // integration annihilates polynomials
                    Symbol inner = Symbol::integral(derivative(i2), tau);
                    Rational du = deg(tid) + 1;
                    if (du < gamma) {
                        int id = intern(inner, du, level);
                        if (!U.contains(id)) newU.push_back(id);
                    }
                    if (du < pcut) {
                        for (int i : range_) {
                            Symbol s = Symbol::leray_integral(i, i1, zero_index(d), inner);
                            int id = intern(s, du, level);
                            if (!P[static_cast<std::size_t>(slot(i))].contains(id)) newP.emplace_back(slot(i), id);
                        }
                    }
                }
            }
        }
        if (level == 1) {
            for (int i : range_)
                for (int id : polys_)
                    if (!P[static_cast<std::size_t>(slot(i))].contains(id)) newP.emplace_back(slot(i), id);
        }

        added_last.clear();
        changed = false;
        for (auto [p, id] : newW) {
            if (W[static_cast<std::size_t>(p)].insert(id)) {
                changed = true;
                added_last.emplace_back(id, SetKind::W);
                int i = range_[static_cast<std::size_t>(p / r_)], j = range_[static_cast<std::size_t>(p % r_)];
                tag(id, {SetKind::W, i, j});
            }
        }
        for (auto [s, id] : newP) {
            if (P[static_cast<std::size_t>(s)].insert(id)) {
                changed = true;
                added_last.emplace_back(id, SetKind::P);
                tag(id, {SetKind::P, range_[static_cast<std::size_t>(s)]});
            }
        }
        for (int id : newU) {
            if (U.insert(id)) {
                changed = true;
                added_last.emplace_back(id, SetKind::U);
                tag(id, {SetKind::U});
            }
        }
        if (!changed) break;
    }
    out.levels_built = std::min(level, spec_.max_levels);
    out.stabilized = spec_.max_levels > 0 && !changed;
    if (spec_.max_levels > 0 && changed) {
        std::set<Rational> growing;
        for (auto [id, kind] : added_last) growing.insert(deg(id));
        out.growing_degrees.assign(growing.begin(), growing.end());
        if (spec_.level_policy == LevelPolicy::RequireStable) {
            std::ostringstream msg;
            msg << "structure did not stabilise within max_levels=" << spec_.max_levels
                << "; degrees still growing:";
            for (const auto& g : out.growing_degrees) msg << ' ' << to_string(g);
            throw StructureError(msg.str());
        }
    }

    for (std::size_t id = 0; id < symbols_.size(); ++id) {
        const auto& tg = tags_[id];
        if (tg.empty()) continue;
        BasisEntry e{symbols_[id], degrees_[id], levels_[id], tg};
        if (!e.in_model_space() && e.degree >= gamma) continue;
        // P-only members are kept only below the cut
        std::sort(e.tags.begin(), e.tags.end(), [](const SetTag& a, const SetTag& b) {
            return std::tie(a.kind, a.i, a.j) < std::tie(b.kind, b.i, b.j);
        });
        out.entries.push_back(std::move(e));
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const BasisEntry& a, const BasisEntry& b) {
        if (a.degree != b.degree) return a.degree < b.degree;
        return compare(a.symbol, b.symbol) < 0;
    });
    return out;
}

}  // namespace

GradedBasis build_structure(const StructureSpec& spec) { return Builder(spec, false).run(); }

GradedBasis extend_with_shifts(const GradedBasis& basis) {
    if (basis.shift_extended) throw StructureError("extend_with_shifts: basis already extended");
    GradedBasis ext = Builder(basis.spec, true).run();
    for (const auto& e : ext.entries) {
        if (e.symbol.hat_count() == 0) continue;
        if (!e.in_model_space()) continue;
        if (e.degree <= 0)
            throw StructureError("kappa too large: " + e.symbol.key() + " has degree " + to_string(e.degree) +
                                 " <= 0");
        Rational orig = degree(e.symbol.without_hats(), basis.spec);
        if (e.degree <= orig)
            throw StructureError("kappa too large: substitution does not raise the degree of " + e.symbol.key());
    }
    return ext;
}

std::vector<BasisEntry> negative_sector(const GradedBasis& basis) {
    std::vector<BasisEntry> out;
    for (const auto& e : basis.entries) {
        if (!e.in_model_space()) continue;
        if (e.degree < 0 || e.symbol.kind() == SymbolKind::One) out.push_back(e);
    }
    std::stable_sort(out.begin(), out.end(), [](const BasisEntry& a, const BasisEntry& b) {
        if (a.degree != b.degree) return a.degree < b.degree;
        return compare(a.symbol, b.symbol) < 0;
    });
    return out;
}

std::vector<BasisEntry> distinct_shapes(const std::vector<BasisEntry>& entries) {
    std::vector<BasisEntry> out;
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        Symbol s = e.symbol.shape();
        if (!seen.insert(s.key()).second) continue;
        BasisEntry c = e;
        c.symbol = s;
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Renormalisation.

int family_arity(RenormFamily f) { return f == RenormFamily::C1 ? 4 : 10; }

const char* family_name(RenormFamily f) {
    switch (f) {
        case RenormFamily::C1: return "C1";
        case RenormFamily::C2: return "C2";
        case RenormFamily::C3: return "C3";
        case RenormFamily::C4: return "C4";
    }
    return "?";
}

std::string family_layout(RenormFamily f) {
    switch (f) {
        case RenormFamily::C1: return "i,i1,j,j1";
        case RenormFamily::C2: return "i,i1,i2,j,j1,j2,k,k1,l,l1";
        case RenormFamily::C3: return "i,i1,i2,i3,k,k1,l,l1,j,j1";
        case RenormFamily::C4: return "i,i1,i2,k,k1,l,l1,l2,j,j1";
    }
    return "";
}

namespace {

std::size_t ipow(std::size_t b, int e) {
    std::size_t r = 1;
    for (int n = 0; n < e; ++n) r *= b;
    return r;
}

}  // namespace

std::size_t renorm_dimension(int d, const std::array<bool, kFamilyCount>& families) {
    if (d < 1) throw StructureError("renorm_dimension: d must be >= 1");
    std::size_t n = 0;
    for (int f = 0; f < kFamilyCount; ++f)
        if (families[static_cast<std::size_t>(f)])
            n += ipow(static_cast<std::size_t>(d), family_arity(static_cast<RenormFamily>(f)));
    return n;
}

namespace {

// I^{i a}(Xi_a): returns (i, a).
std::optional<std::pair<int, int>> noise_leaf(const Symbol& s) {
    if (s.kind() != SymbolKind::IntP || !is_zero(s.multi_index())) return std::nullopt;
    const Symbol& c = s.children()[0];
    if (c.kind() != SymbolKind::IntK || !is_zero(c.multi_index())) return std::nullopt;
    const Symbol& x = c.children()[0];
    if (x.kind() != SymbolKind::Xi || x.first_index() != s.second_index()) return std::nullopt;
    return std::make_pair(s.first_index(), s.second_index());
}

// I^{i i1}_m(tau): returns (i, i1, m, tau); m is the spatial derivative direction.
struct Composite {
    int i, i1, m;
    const Symbol* tau;
};

std::optional<Composite> composite(const Symbol& s) {
    if (s.kind() != SymbolKind::IntP || !is_zero(s.multi_index())) return std::nullopt;
    const Symbol& c = s.children()[0];
    if (c.kind() != SymbolKind::IntK) return std::nullopt;
    const auto& k = c.multi_index();
    if (k.empty() || k[0] != 0) return std::nullopt;
    int m = -1;
    for (std::size_t a = 1; a < k.size(); ++a) {
        if (k[a] == 0) continue;
        if (k[a] != 1 || m != -1) return std::nullopt;
        m = static_cast<int>(a);
    }
    if (m == -1) return std::nullopt;
    return Composite{s.first_index(), s.second_index(), m, &c.children()[0]};
}

// Index of the derivative direction as a component label (shape symbols fold to 1 -> wildcard).
int direction_label(int m, bool shape) { return shape ? kWildcard : m; }

// Split a two-factor product into (factor with outer index p, factor with outer index q).
template <class F>
std::optional<std::pair<const Symbol*, const Symbol*>> assign(const Symbol& prod, int p, int q, F&& outer) {
    if (prod.kind() != SymbolKind::Prod || prod.children().size() != 2) return std::nullopt;
    const Symbol& a = prod.children()[0];
    const Symbol& b = prod.children()[1];
    auto oa = outer(a), ob = outer(b);
    if (!oa || !ob) return std::nullopt;
    if (*oa == p && *ob == q) return std::make_pair(&a, &b);
    if (*ob == p && *oa == q) return std::make_pair(&b, &a);
    return std::nullopt;
}

// I^{i i1}_k(I^{i1 i2}(Xi) I^{k k1}(Xi)): returns (i, i1, i2, k, k1)
std::optional<std::array<int, 5>> quadratic_composite(const Symbol& s, bool shape) {
    auto c = composite(s);
    if (!c) return std::nullopt;
    int k = direction_label(c->m, shape);
    auto outer = [](const Symbol& x) -> std::optional<int> {
        auto l = noise_leaf(x);
        if (!l) return std::nullopt;
        return l->first;
    };
    auto ab = assign(*c->tau, c->i1, k, outer);
    if (!ab) return std::nullopt;
    auto A = noise_leaf(*ab->first);
    auto B = noise_leaf(*ab->second);
    return std::array<int, 5>{c->i, c->i1, A->second, B->first, B->second};
}

struct Match {
    RenormFamily family;
    std::vector<int> tuple;
};

std::optional<Match> match(const Symbol& tau, bool shape) {
    if (tau.kind() != SymbolKind::Prod || tau.children().size() != 2) return std::nullopt;
    const Symbol& a = tau.children()[0];
    const Symbol& b = tau.children()[1];
    // C1
    if (auto la = noise_leaf(a)) {
        if (auto lb = noise_leaf(b)) return Match{RenormFamily::C1, {la->first, la->second, lb->first, lb->second}};
    }
    // C2
    if (auto qa = quadratic_composite(a, shape)) {
        if (auto qb = quadratic_composite(b, shape)) {
            const auto& x = *qa;
            const auto& y = *qb;
            return Match{RenormFamily::C2, {x[0], x[1], x[2], y[0], y[1], y[2], x[3], x[4], y[3], y[4]}};
        }
    }
    // C3 / C4: one noise leaf times I^{i i1}_l(Q x)
    const Symbol* leaf = nullptr;
    const Symbol* rest = nullptr;
    if (noise_leaf(a)) {
        leaf = &a;
        rest = &b;
    } else if (noise_leaf(b)) {
        leaf = &b;
        rest = &a;
    } else {
        return std::nullopt;
    }
    auto j = noise_leaf(*leaf);
    auto R = composite(*rest);
    if (!R) return std::nullopt;
    const Symbol& inner = *R->tau;
    if (inner.kind() != SymbolKind::Prod || inner.children().size() != 2) return std::nullopt;
    int l = direction_label(R->m, shape);
    const Symbol* q = nullptr;
    const Symbol* x = nullptr;
    for (int n = 0; n < 2; ++n) {
        const Symbol& u = inner.children()[static_cast<std::size_t>(n)];
        const Symbol& v = inner.children()[static_cast<std::size_t>(1 - n)];
        if (quadratic_composite(u, shape) && noise_leaf(v)) {
            q = &u;
            x = &v;
            break;
        }
    }
    if (!q) return std::nullopt;
    auto Q = *quadratic_composite(*q, shape);
    auto X = *noise_leaf(*x);
    if (Q[0] == R->i1 && X.first == l) {
        // I^{i i1}_l(I^{i1 i2}_k(I^{i2 i3} I^{k k1}) I^{l l1}) I^{j j1}
        return Match{RenormFamily::C3, {R->i, R->i1, Q[1], Q[2], Q[3], Q[4], l, X.second, j->first, j->second}};
    }
    if (Q[0] == l && X.first == R->i1) {
        // I^{i i1}_l(I^{l l1}_k(I^{l1 l2} I^{k k1}) I^{i1 i2}) I^{j j1}
        return Match{RenormFamily::C4, {R->i, R->i1, X.second, Q[3], Q[4], l, Q[1], Q[2], j->first, j->second}};
    }
    return std::nullopt;
}

}  // namespace

std::optional<RenormSlot> renorm_slot(const Symbol& tau, int d) {
    auto m = match(tau, false);
    if (!m) return std::nullopt;
    std::size_t flat = 0;
    for (int v : m->tuple) {
        if (v < 1 || v > d) return std::nullopt;
        flat = flat * static_cast<std::size_t>(d) + static_cast<std::size_t>(v - 1);
    }
    return RenormSlot{m->family, flat};
}

std::array<bool, kFamilyCount> active_families(const StructureSpec& spec) {
    StructureSpec s = spec;
    s.index_mode = IndexMode::Shape;
    s.gamma_cut = Rational(1, 100);
    s.max_levels = std::max(spec.max_levels, 16);
    s.level_policy = LevelPolicy::RequireStable;
    auto basis = build_structure(s);
    std::array<bool, kFamilyCount> on{};
    for (const auto& e : negative_sector(basis)) {
        if (auto m = match(e.symbol, true)) {
            on[static_cast<std::size_t>(m->family)] = true;
            if (m->family == RenormFamily::C3 || m->family == RenormFamily::C4) {
                // one shape carries both families
                on[static_cast<std::size_t>(RenormFamily::C3)] = true;
                on[static_cast<std::size_t>(RenormFamily::C4)] = true;
            }
        }
    }
    return on;
}

std::size_t renorm_dimension(const StructureSpec& spec) {
    spec.validate();
    return renorm_dimension(spec.scaling.d, active_families(spec));
}

RenormVector::RenormVector(int d, const std::array<bool, kFamilyCount>& families) : d_(d) {
    for (int f = 0; f < kFamilyCount; ++f)
        if (families[static_cast<std::size_t>(f)])
            values_[static_cast<std::size_t>(f)].assign(
                ipow(static_cast<std::size_t>(d), family_arity(static_cast<RenormFamily>(f))), Rational(0));
}

std::size_t RenormVector::key_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

std::size_t RenormVector::flat_index(RenormFamily f, const std::vector<int>& tuple) const {
    if (static_cast<int>(tuple.size()) != family_arity(f))
        throw StructureError(std::string("wrong tuple length for ") + family_name(f));
    std::size_t flat = 0;
    for (int v : tuple) {
        if (v < 1 || v > d_) throw StructureError("index out of range 1..d");
        flat = flat * static_cast<std::size_t>(d_) + static_cast<std::size_t>(v - 1);
    }
    return flat;
}

Rational& RenormVector::at(RenormFamily f, std::size_t flat) {
    auto& v = values_[static_cast<std::size_t>(f)];
    if (flat >= v.size()) throw StructureError(std::string("no such constant in family ") + family_name(f));
    return v[flat];
}

const Rational& RenormVector::at(RenormFamily f, std::size_t flat) const {
    const auto& v = values_[static_cast<std::size_t>(f)];
    if (flat >= v.size()) throw StructureError(std::string("no such constant in family ") + family_name(f));
    return v[flat];
}

Rational& RenormVector::at(RenormFamily f, const std::vector<int>& tuple) { return at(f, flat_index(f, tuple)); }

std::string RenormVector::key_name(RenormFamily f, std::size_t flat) const {
    const int n = family_arity(f);
    std::vector<int> t(static_cast<std::size_t>(n));
    for (int a = n - 1; a >= 0; --a) {
        t[static_cast<std::size_t>(a)] = static_cast<int>(flat % static_cast<std::size_t>(d_)) + 1;
        flat /= static_cast<std::size_t>(d_);
    }
    std::string s = std::string(family_name(f)) + "[";
    for (int a = 0; a < n; ++a) {
        if (a) s += ',';
        s += std::to_string(t[static_cast<std::size_t>(a)]);
    }
    return s + "]";
}

std::vector<std::string> RenormVector::key_names() const {
    std::vector<std::string> out;
    out.reserve(key_count());
    for (int f = 0; f < kFamilyCount; ++f)
        for (std::size_t n = 0; n < values_[static_cast<std::size_t>(f)].size(); ++n)
            out.push_back(key_name(static_cast<RenormFamily>(f), n));
    return out;
}

RenormVector RenormVector::operator+(const RenormVector& o) const {
    if (d_ != o.d_) throw StructureError("renorm vectors of different dimension");
    RenormVector r = *this;
    for (int f = 0; f < kFamilyCount; ++f) {
        auto& a = r.values_[static_cast<std::size_t>(f)];
        const auto& b = o.values_[static_cast<std::size_t>(f)];
        if (a.size() != b.size()) throw StructureError("renorm vectors with different families");
        for (std::size_t n = 0; n < a.size(); ++n) a[n] += b[n];
    }
    return r;
}

RenormTable::RenormTable(const GradedBasis& basis) {
    if (basis.spec.index_mode != IndexMode::Concrete)
        throw StructureError("renormalisation acts on concrete (indexed) symbols");
    const int d = basis.spec.scaling.d;
    slots_.resize(basis.entries.size());
    for (std::size_t n = 0; n < basis.entries.size(); ++n) {
        const auto& e = basis.entries[n];
        if (e.symbol.kind() == SymbolKind::One) unit_id_ = static_cast<int>(n);
        if (e.degree < 0 && e.in_model_space()) slots_[n] = renorm_slot(e.symbol, d);
    }
    if (unit_id_ < 0) throw StructureError("basis has no unit");
}

RenormTable::Sparse RenormTable::apply(const RenormVector& g, const Sparse& x) const {
    Sparse out;
    apply(g, x, out);
    return out;
}

void RenormTable::apply(const RenormVector& g, const Sparse& x, Sparse& out) const {
    out.clear();
    Rational unit(0);
    for (const auto& [id, c] : x) {
        if (id < 0 || static_cast<std::size_t>(id) >= slots_.size()) throw StructureError("symbol id outside basis");
        if (id == unit_id_) {
            unit += c;
            continue;
        }
        out.emplace_back(id, c);
        const auto& s = slots_[static_cast<std::size_t>(id)];
        if (s && g.has(s->family)) unit -= c * g.at(s->family, s->flat);
    }
    if (unit != Rational(0)) {
        auto it = std::lower_bound(out.begin(), out.end(), unit_id_,
                                   [](const std::pair<int, Rational>& p, int v) { return p.first < v; });
        out.insert(it, {unit_id_, unit});
    }
}

LinearCombination apply_renorm(const RenormVector& g, const LinearCombination& x, const GradedBasis& basis) {
    if (basis.spec.index_mode != IndexMode::Concrete)
        throw StructureError("renormalisation acts on concrete (indexed) symbols");
    const int d = basis.spec.scaling.d;
    if (g.dimension() != d) throw StructureError("renorm vector dimension does not match basis");
    LinearCombination out;
    const Symbol unit = Symbol::one();
    for (const auto& [tau, c] : x) {
        auto pos = basis.find(tau);
        if (!pos) throw StructureError("symbol outside the built basis: " + tau.key());
        const auto& e = basis.entries[*pos];
        if (!(e.in_model_space() && (e.degree < 0 || tau.kind() == SymbolKind::One)))
            throw StructureError("symbol outside the negative sector: " + tau.key());
        out[tau] += c;
        if (auto s = renorm_slot(tau, d); s && g.has(s->family)) out[unit] -= c * g.at(s->family, s->flat);
    }
    for (auto it = out.begin(); it != out.end();) it = it->second == Rational(0) ? out.erase(it) : std::next(it);
    return out;
}

// ---------------------------------------------------------------------------

const char* sector_name(SectorTag t) {
    switch (t) {
        case SectorTag::Polynomial: return "polynomial";
        case SectorTag::Noise: return "noise";
        case SectorTag::Solution: return "solution";
        case SectorTag::Jacobian: return "jacobian";
        case SectorTag::Product: return "product";
        case SectorTag::Other: return "other";
    }
    return "?";
}

SectorInfo sector_of(const Symbol& tau, const StructureSpec& spec) {
    switch (tau.kind()) {
        case SymbolKind::One:
        case SymbolKind::Poly: return {SectorTag::Polynomial, Rational(0)};
        case SymbolKind::Xi: return {SectorTag::Noise, spec.alpha};
        case SymbolKind::XiHat: return {SectorTag::Noise, -spec.kappa};
        case SymbolKind::IntK:
        case SymbolKind::IntP: {
            if (noise_leaf(tau)) return {SectorTag::Solution, spec.alpha + 2};
            return {SectorTag::Jacobian, spec.alpha + 3};
        }
        case SymbolKind::Prod: {
            Rational m(0);
            for (const auto& c : tau.children()) {
                auto s = sector_of(c, spec);
                m += s.min_degree;
            }
            return {SectorTag::Product, m};
        }
    }
    return {SectorTag::Other, Rational(0)};
}

}  // namespace sns::structure
