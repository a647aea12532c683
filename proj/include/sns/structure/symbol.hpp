#pragma once

#include "sns/core/scaling.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace sns::structure {

// Index value 0 is the wildcard used by shape (index-erased) symbols.
inline constexpr int kWildcard = 0;

enum class SymbolKind : std::uint8_t {
    One = 0,
    Poly,    // X^k
    Xi,      // noise component
    XiHat,   // shift generator
    IntK,    // I_k(child), heat-kernel integration
    IntP,    // I0^{ij}_k(child), Leray-kernel integration
    Prod,
};

const char* kind_name(SymbolKind k);

// Immutable tree handle. Factories other than parse() always return the
// canonical form: flattened products, units dropped, polynomial factors merged,
// factors sorted by compare().
class Symbol {
public:
    static Symbol one();
    static Symbol poly(MultiIndex k);
    static Symbol xi(int i);
    static Symbol xi_hat(int i);
    static Symbol integral(MultiIndex k, Symbol child);
    static Symbol leray_integral(int i, int j, MultiIndex k, Symbol child);
    static Symbol product(std::vector<Symbol> factors);
    // Product node exactly as given; used by parse() and tests.
    static Symbol unchecked_product(std::vector<Symbol> factors);

    // Reads the key() grammar. Products are taken verbatim, so the result may
    // be non-canonical.
    static Symbol parse(std::string_view text);

    SymbolKind kind() const;
    int first_index() const;   // Xi/XiHat component, IntP upper i
    int second_index() const;  // IntP upper j
    const MultiIndex& multi_index() const;
    const std::vector<Symbol>& children() const;

    // 1 | (X k..) | (Xi i) | (XiHat i) | (I (k..) c) | (I0 i j (k..) c) | (* f..)
    // wildcard indices print as "*".
    const std::string& key() const;

    bool is_canonical() const;
    bool is_polynomial() const;  // One or Poly
    int hat_count() const;
    int noise_count() const;  // Xi + XiHat leaves

    Symbol without_hats() const;
    Symbol shape() const;  // all component indices -> wildcard, spatial derivatives folded

    friend bool operator==(const Symbol& a, const Symbol& b);

    struct Node;

private:
    explicit Symbol(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

// Total order: kind, indices, multi-index, then children.
int compare(const Symbol& a, const Symbol& b);

struct SymbolLess {
    bool operator()(const Symbol& a, const Symbol& b) const { return compare(a, b) < 0; }
};

struct SymbolHash {
    std::size_t operator()(const Symbol& s) const;
};

}  // namespace sns::structure
