#pragma once

#include "sns/core/rational.hpp"
#include "sns/core/scaling.hpp"
#include "sns/structure/symbol.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sns::structure {

using sns::to_string;

struct StructureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class IndexMode { Shape, Concrete };
enum class LevelPolicy { RequireStable, Partial };

struct StructureSpec {
    Scaling scaling{2, 3};
    Rational alpha{-51, 20};
    Rational kappa{1, 100};
    Rational gamma_cut{2};
    int max_levels = 16;
    IndexMode index_mode = IndexMode::Shape;
    LevelPolicy level_policy = LevelPolicy::RequireStable;

    // min(0, alpha+2, 2alpha+5): lowest degree a factor may be multiplied by.
    Rational min_factor_degree() const;
    // Cut applied to polynomial-degree and P-type factors.
    Rational factor_cut() const;
    void validate() const;
};

// Throws StructureError for non-canonical input.
Rational degree(const Symbol& tau, const StructureSpec& spec);

enum class SetKind { Poly, W, P, U };

struct SetTag {
    SetKind kind;
    int i = kWildcard;
    int j = kWildcard;
    friend bool operator==(const SetTag&, const SetTag&) = default;
};

std::string to_string(const SetTag& t);

struct BasisEntry {
    Symbol symbol;
    Rational degree;
    int level = 0;
    std::vector<SetTag> tags;

    bool in_model_space() const;  // polynomial, W or U
};

struct GradedBasis {
    StructureSpec spec;
    bool shift_extended = false;
    bool stabilized = false;
    int levels_built = 0;
    std::vector<Rational> growing_degrees;  // degrees still being added at the last level
    std::vector<BasisEntry> entries;        // sorted by (degree, symbol)

    std::optional<std::size_t> find(const Symbol& s) const;
};

GradedBasis build_structure(const StructureSpec& spec);

// Rebuild with the doubled alphabet {Xi, XiHat}. Throws StructureError if a
// symbol containing XiHat fails to have positive degree.
GradedBasis extend_with_shifts(const GradedBasis& basis);

// Elements of the model space with negative degree, plus 1; ascending degree.
std::vector<BasisEntry> negative_sector(const GradedBasis& basis);

// Distinct shapes of a list of entries, keeping the first representative.
std::vector<BasisEntry> distinct_shapes(const std::vector<BasisEntry>& entries);

// ---------------------------------------------------------------------------
// Renormalisation constants.

enum class RenormFamily { C1 = 0, C2 = 1, C3 = 2, C4 = 3 };
inline constexpr int kFamilyCount = 4;

int family_arity(RenormFamily f);  // 4 or 10 component indices
const char* family_name(RenormFamily f);
std::string family_layout(RenormFamily f);  // e.g. "i,i1,j,j1"

std::size_t renorm_dimension(int d, const std::array<bool, kFamilyCount>& families);
std::size_t renorm_dimension(const StructureSpec& spec);

// Which families have a tree shape inside the negative sector of spec.
std::array<bool, kFamilyCount> active_families(const StructureSpec& spec);

class RenormVector {
public:
    RenormVector() = default;
    RenormVector(int d, const std::array<bool, kFamilyCount>& families);

    int dimension() const { return d_; }
    bool has(RenormFamily f) const { return !values_[static_cast<int>(f)].empty(); }
    std::size_t key_count() const;

    std::size_t flat_index(RenormFamily f, const std::vector<int>& tuple) const;  // tuple entries in 1..d
    Rational& at(RenormFamily f, std::size_t flat);
    const Rational& at(RenormFamily f, std::size_t flat) const;
    Rational& at(RenormFamily f, const std::vector<int>& tuple);
    std::size_t family_size(RenormFamily f) const { return values_[static_cast<int>(f)].size(); }

    std::string key_name(RenormFamily f, std::size_t flat) const;  // "C2[1,2,...]"
    std::vector<std::string> key_names() const;

    RenormVector operator+(const RenormVector& o) const;
    bool operator==(const RenormVector& o) const = default;

private:
    int d_ = 0;
    std::array<std::vector<Rational>, kFamilyCount> values_;
};

// Sparse linear combination of symbols.
using LinearCombination = std::map<Symbol, Rational, SymbolLess>;

struct RenormSlot {
    RenormFamily family;
    std::size_t flat;
};

// Recognise tau as one of the renormalised trees; returns the constant's slot.
std::optional<RenormSlot> renorm_slot(const Symbol& tau, int d);

// Precomputed action of M_g on a fixed concrete basis.
class RenormTable {
public:
    explicit RenormTable(const GradedBasis& basis);

    using Sparse = std::vector<std::pair<int, Rational>>;  // (basis id, coefficient), sorted by id

    std::size_t size() const { return slots_.size(); }
    int unit_id() const { return unit_id_; }
    const std::optional<RenormSlot>& slot(int id) const { return slots_.at(static_cast<std::size_t>(id)); }
    Sparse apply(const RenormVector& g, const Sparse& x) const;
    void apply(const RenormVector& g, const Sparse& x, Sparse& out) const;  // out must not alias x

private:
    std::vector<std::optional<RenormSlot>> slots_;
    int unit_id_ = -1;
};

// M_g x. Throws StructureError if x has support outside basis (model space).
LinearCombination apply_renorm(const RenormVector& g, const LinearCombination& x, const GradedBasis& basis);

// ---------------------------------------------------------------------------

enum class SectorTag { Polynomial, Noise, Solution, Jacobian, Product, Other };

struct SectorInfo {
    SectorTag tag;
    Rational min_degree;
};

const char* sector_name(SectorTag t);
SectorInfo sector_of(const Symbol& tau, const StructureSpec& spec);

}  // namespace sns::structure
