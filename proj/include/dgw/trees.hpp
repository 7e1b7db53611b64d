#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dgw/analysis.hpp"
#include "dgw/environment.hpp"
#include "dgw/error.hpp"
#include "dgw/offspring.hpp"
#include "dgw/parallel.hpp"
#include "dgw/rng.hpp"
#include "dgw/state.hpp"

namespace dgw {

// Ulam-Harris label: the root is empty, child j of i is i followed by j >= 1.
using Label = std::vector<std::uint32_t>;

// Component used for the defective element i Delta in the label-set view.
inline constexpr std::uint32_t kDeltaComponent = 0;

// A finite defective family tree stored as label -> child count. A value of
// State::graveyard() means the node's child is the defective element; nullopt
// means the node was not expanded (depth cap, or cut off below a defective
// element). Nodes are kept in lexicographic label order.
class DefectiveTree {
 public:
  using Children = std::optional<State>;
  using NodeMap = std::map<Label, Children>;

  DefectiveTree() { nodes_.emplace(Label{}, std::nullopt); }

  const NodeMap& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(const Label& l) const { return nodes_.contains(l); }
  Children children(const Label& l) const { return nodes_.at(l); }

  // Sets c(label) and inserts unexpanded children 1..c.
  void expand(const Label& label, State c) {
    auto it = nodes_.find(label);
    if (it == nodes_.end()) throw std::invalid_argument("label: not a node of the tree");
    if (it->second) throw std::invalid_argument("label: node already expanded");
    it->second = c;
    if (c.is_graveyard()) return;
    Label child = label;
    child.push_back(0);
    for (State::count_type j = 1; j <= c.count(); ++j) {
      child.back() = static_cast<std::uint32_t>(j);
      nodes_.emplace(child, std::nullopt);
    }
  }

  // Replaces the node at `at` and everything below it by `sub`.
  void graft(const Label& at, const DefectiveTree& sub) {
    if (!contains(at)) throw std::invalid_argument("label: graft point is not a node");
    erase_below(at);
    for (const auto& [l, c] : sub.nodes_) {
      Label full = at;
      full.insert(full.end(), l.begin(), l.end());
      nodes_[full] = c;
    }
  }

  // Depth of the shallowest node whose child is the defective element.
  std::optional<std::size_t> graveyard_depth() const {
    std::optional<std::size_t> d;
    for (const auto& [l, c] : nodes_)
      if (c && c->is_graveyard() && (!d || l.size() < *d)) d = l.size();
    return d;
  }

  // Enforces property (iii): below the shallowest defective element nothing is
  // kept, and individuals at its depth are left unexpanded.
  void normalize_graveyard() {
    const auto d = graveyard_depth();
    if (!d) return;
    for (auto it = nodes_.begin(); it != nodes_.end();) {
      if (it->first.size() > *d + 1) {
        it = nodes_.erase(it);
      } else {
        if (it->first.size() == *d + 1) it->second.reset();
        ++it;
      }
    }
  }

  // Nodes of depth at most h; those at depth h become unexpanded.
  DefectiveTree truncated(std::size_t h) const {
    DefectiveTree out;
    out.nodes_.clear();
    for (const auto& [l, c] : nodes_) {
      if (l.size() > h) continue;
      out.nodes_.emplace(l, l.size() == h ? std::nullopt : c);
    }
    return out;
  }

  // Subtree founded by child i of the root, relabelled with a new root.
  DefectiveTree subtree(std::uint32_t i) const {
    DefectiveTree out;
    out.nodes_.clear();
    const Label start{i};
    for (auto it = nodes_.lower_bound(start); it != nodes_.end() && !it->first.empty() && it->first[0] == i; ++it)
      out.nodes_.emplace(Label(it->first.begin() + 1, it->first.end()), it->second);
    if (out.nodes_.empty()) throw std::invalid_argument("i: root has no such child");
    return out;
  }

  static DefectiveTree from_nodes(NodeMap nodes);

  friend bool operator==(const DefectiveTree&, const DefectiveTree&) = default;

 private:
  void erase_below(const Label& at) {
    auto it = nodes_.upper_bound(at);
    while (it != nodes_.end() && it->first.size() > at.size() && std::equal(at.begin(), at.end(), it->first.begin()))
      it = nodes_.erase(it);
  }

  NodeMap nodes_;
};

// ---------------------------------------------------------------------------
// Label-set view and validation of properties (i)-(v)

inline std::string label_to_string(const Label& l) {
  std::string s;
  for (std::size_t k = 0; k < l.size(); ++k) {
    if (k) s += '.';
    s += l[k] == kDeltaComponent ? std::string{"D"} : std::to_string(l[k]);
  }
  return s;
}

// The tree as a subset of I_Delta: every node plus i Delta for defective children.
inline std::set<Label> label_set(const DefectiveTree& t) {
  std::set<Label> out;
  for (const auto& [l, c] : t.nodes()) {
    out.insert(l);
    if (c && c->is_graveyard()) {
      Label d = l;
      d.push_back(kDeltaComponent);
      out.insert(d);
    }
  }
  return out;
}

// First violated property of a label set, or nullopt for a defective family tree.
inline std::optional<std::string> check_label_set(const std::set<Label>& t) {
  if (!t.contains(Label{})) return "(i): root missing";
  std::optional<std::size_t> cap;
  for (const auto& l : t) {
    for (std::size_t k = 0; k + 1 < l.size(); ++k)
      if (l[k] == kDeltaComponent) return "label " + label_to_string(l) + ": defective element inside a string";
    if (!l.empty() && l.back() == kDeltaComponent && (!cap || l.size() < *cap)) cap = l.size();
  }
  for (const auto& l : t) {
    if (l.empty()) continue;
    const Label parent(l.begin(), l.end() - 1);
    if (!t.contains(parent)) return "(ii): parent of " + label_to_string(l) + " missing";
    if (cap && l.size() > *cap) return "(iii): " + label_to_string(l) + " deeper than a defective element";
    Label sib = parent;
    sib.push_back(0);
    if (l.back() == kDeltaComponent) {
      sib.back() = 1;
      if (t.contains(sib)) return "(iv): " + label_to_string(l) + " has numeric siblings";
    } else {
      for (std::uint32_t j = 1; j < l.back(); ++j) {
        sib.back() = j;
        if (!t.contains(sib)) return "(iv): left sibling " + label_to_string(sib) + " missing";
      }
    }
  }
  // (v) holds for every finite set
  return std::nullopt;
}

// Structural check of the stored tree followed by (i)-(v) on its label set.
inline std::optional<std::string> validate(const DefectiveTree& tree) {
  const auto& nodes = tree.nodes();
  if (!nodes.contains(Label{})) return "(i): root missing";
  for (const auto& [l, c] : nodes) {
    for (std::uint32_t x : l)
      if (x == kDeltaComponent) return "label " + label_to_string(l) + ": component 0 is reserved";
    if (!l.empty()) {
      const Label parent(l.begin(), l.end() - 1);
      const auto p = nodes.find(parent);
      if (p == nodes.end()) return "(ii): parent of " + label_to_string(l) + " missing";
      if (!p->second || p->second->is_graveyard() || l.back() > p->second->count())
        return "node " + label_to_string(l) + ": not among the children recorded for its parent";
    }
    if (c && !c->is_graveyard()) {
      Label child = l;
      child.push_back(0);
      for (State::count_type j = 1; j <= c->count(); ++j) {
        child.back() = static_cast<std::uint32_t>(j);
        if (!nodes.contains(child)) return "node " + label_to_string(l) + ": child " + std::to_string(j) + " missing";
      }
    }
  }
  if (const auto d = tree.graveyard_depth()) {
    for (const auto& [l, c] : nodes)
      if (l.size() == *d + 1 && c) return "(iii): node " + label_to_string(l) + " expanded below a defective element";
  }
  return check_label_set(label_set(tree));
}

inline DefectiveTree DefectiveTree::from_nodes(NodeMap nodes) {
  DefectiveTree t;
  t.nodes_ = std::move(nodes);
  if (auto err = validate(t)) throw std::invalid_argument("tree: " + *err);
  return t;
}

// ---------------------------------------------------------------------------
// Height and generation sizes

// Whether every node above the frontier is expanded and the tree ended by
// extinction or a defective element.
inline bool is_complete(const DefectiveTree& t) {
  const auto d = t.graveyard_depth();
  for (const auto& [l, c] : t.nodes())
    if (!c && !(d && l.size() == *d + 1)) return false;
  return true;
}

// h(t): depth of the shallowest defective element's parent, or the deepest
// generation of an extinct tree; nullopt when the expanded prefix is still
// alive at its frontier.
inline std::optional<std::size_t> height(const DefectiveTree& t) {
  if (const auto d = t.graveyard_depth()) return *d;
  if (!is_complete(t)) return std::nullopt;
  std::size_t h = 0;
  for (const auto& [l, c] : t.nodes()) h = std::max(h, l.size());
  return h;
}

// z_0, z_1, ... as far as determined: counts up to h(t) followed by the
// terminal Delta or 0; for a tree alive at its frontier, counts up to the
// frontier depth.
inline std::vector<State> generation_sizes(const DefectiveTree& t) {
  std::vector<State::count_type> counts;
  const auto d = t.graveyard_depth();
  for (const auto& [l, c] : t.nodes()) {
    if (d && l.size() > *d) continue;
    if (counts.size() <= l.size()) counts.resize(l.size() + 1, 0);
    ++counts[l.size()];
  }
  std::vector<State> out;
  for (auto x : counts) out.emplace_back(x);
  if (d) out.push_back(State::graveyard());
  else if (is_complete(t)) out.emplace_back(0);
  return out;
}

// z_k(t), or nullopt when k lies beyond the expanded prefix.
inline std::optional<State> generation_size(const DefectiveTree& t, std::size_t k) {
  const auto z = generation_sizes(t);
  if (k < z.size()) return z[k];
  if (!z.empty() && (z.back().is_graveyard() || z.back().is_extinct()) && is_complete(t)) return z.back();
  return std::nullopt;
}

struct TreeStats {
  std::optional<std::size_t> height;  // nullopt: not determined by the expanded prefix
  std::vector<State> gen_sizes;
  std::optional<std::size_t> rank;    // R_n; nullopt encodes infinity
};

// h(t), generation sizes and R_n = min{1 <= i <= z_1 : 0 < z_{n-1}(t_i) != Delta}.
inline TreeStats tree_stats(const DefectiveTree& t, std::size_t n) {
  if (n == 0) throw std::invalid_argument("n: must be >= 1");
  TreeStats s;
  s.height = height(t);
  s.gen_sizes = generation_sizes(t);
  const auto c = t.children(Label{});
  if (!c) throw precondition_error("tree_stats: root is not expanded");
  if (c->is_graveyard()) return s;
  for (std::uint32_t i = 1; i <= c->count(); ++i) {
    const auto z = generation_size(t.subtree(i), n - 1);
    if (!z) throw precondition_error("tree_stats: subtree " + std::to_string(i) + " not expanded to generation " +
                                     std::to_string(n - 1));
    if (z->is_alive()) {
      s.rank = i;
      break;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Serialization: one "label,child_count" record per node in label order, with
// dot-separated labels, the root as the empty label, D for a defective child
// and ? for an unexpanded node.

inline std::string serialize(const DefectiveTree& t) {
  std::string out;
  for (const auto& [l, c] : t.nodes()) {
    out += label_to_string(l);
    out += ',';
    out += c ? c->to_string() : std::string{"?"};
    out += '\n';
  }
  return out;
}

inline DefectiveTree parse_tree(const std::string& text) {
  DefectiveTree::NodeMap nodes;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("line " + std::to_string(lineno) + ": " + what);
  };
  auto parse_count = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) fail("expected a nonnegative integer");
    try {
      return std::stoull(s);
    } catch (const std::out_of_range&) {
      fail("integer out of range");
    }
    return 0;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) fail("missing ','");
    const std::string lab = line.substr(0, comma), val = line.substr(comma + 1);
    Label l;
    if (!lab.empty()) {
      std::size_t pos = 0;
      for (;;) {
        const auto dot = lab.find('.', pos);
        const auto v = parse_count(lab.substr(pos, dot - pos));
        if (v == 0 || v > std::numeric_limits<std::uint32_t>::max()) fail("label components must be >= 1");
        l.push_back(static_cast<std::uint32_t>(v));
        if (dot == std::string::npos) break;
        pos = dot + 1;
      }
    }
    DefectiveTree::Children c;
    if (val == "D") c = State::graveyard();
    else if (val != "?") c = State{parse_count(val)};
    if (!nodes.emplace(std::move(l), c).second) fail("duplicate label");
  }
  return DefectiveTree::from_nodes(std::move(nodes));
}

// ---------------------------------------------------------------------------
// Unconditioned sampler and prefix probabilities

namespace detail {

// laws[k] drives nodes at depth k; nodes at depth_cap stay unexpanded.
inline DefectiveTree sample_tree(std::span<const OffspringLaw> laws, std::size_t depth_cap, RandomStream& rng) {
  if (depth_cap > laws.size()) throw std::invalid_argument("depth_cap: exceeds materialized environment");
  DefectiveTree t;
  std::vector<Label> level{Label{}};
  for (std::size_t g = 0; g < depth_cap && !level.empty(); ++g) {
    std::vector<Label> next;
    bool absorbed = false;
    for (const Label& l : level) {
      const State c = sample(laws[g], rng);
      t.expand(l, c);
      if (c.is_graveyard()) {
        absorbed = true;
        continue;
      }
      Label child = l;
      child.push_back(0);
      for (State::count_type j = 1; j <= c.count(); ++j) {
        child.back() = static_cast<std::uint32_t>(j);
        next.push_back(child);
      }
    }
    if (absorbed) break;
    level = std::move(next);
  }
  return t;
}

}  // namespace detail

// DBTVE grown generation by generation to depth_cap: every individual at depth
// g draws c from f_{g+1}; a defective draw ends growth after that generation.
inline DefectiveTree sample_dbtve(const Environment& env, std::size_t depth_cap, RandomStream& rng) {
  const auto laws = env.laws(depth_cap);
  return detail::sample_tree(laws, depth_cap, rng);
}

namespace detail {

inline double prefix_prob(std::span<const OffspringLaw> laws, const DefectiveTree& t, std::size_t h) {
  const auto d = t.graveyard_depth();
  double p = 1.0;
  for (const auto& [l, c] : t.nodes()) {
    const std::size_t g = l.size();
    if (g >= h || (d && g > *d)) continue;
    if (!c) throw precondition_error("prefix_prob: node " + label_to_string(l) + " not expanded below height h");
    const OffspringLaw& f = laws[g];
    p *= c->is_graveyard() ? f.defect() : f.mass(c->count());
  }
  return p;
}

}  // namespace detail

// P[T =_h t]: product of f_{g(i)+1}[c(i)] over individuals with g(i) < h, with
// 1 - f_{g(i)+1}(1) for an individual whose child is the defective element.
// Individuals below a defective element contribute nothing.
inline double prefix_prob(const Environment& env, const DefectiveTree& t, std::size_t h) {
  if (auto err = validate(t)) throw std::invalid_argument("tree: " + *err);
  const auto laws = env.laws(h);
  return detail::prefix_prob(laws, t, h);
}

// Canonical key of the prefix t cap I_Delta^(h).
inline std::string prefix_key(const DefectiveTree& t, std::size_t h) { return serialize(t.truncated(h)); }

// ---------------------------------------------------------------------------
// Spine distribution g_{l,n}[d, c]

struct SpineEntry {
  std::size_t d{1};
  std::size_t c{1};
  double weight{0.0};
};

struct SpineDist {
  std::size_t l{1};
  std::size_t n{1};
  std::vector<SpineEntry> entries;  // ordered by c, then d
  double total{0.0};
  double truncated_tail{0.0};  // mass of f_l above the listed c (linear-fractional only)
};

inline constexpr double kSpineTailTol = 1e-14;

namespace detail {

inline SpineDist spine_dist(std::span<const OffspringLaw> laws, std::size_t l, std::size_t n,
                            const std::vector<double>& log_gap, const CompositionSweep& at0,
                            const CompositionSweep& at1) {
  if (log_gap[l - 1] == kNegInf) throw precondition_error("spine_dist: survival to generation n is impossible");
  SpineDist s;
  s.l = l;
  s.n = n;
  const OffspringLaw& f = laws[l - 1];
  const double ratio = std::exp(log_gap[l] - log_gap[l - 1]);
  const double a = at0.at(l), b = at1.at(l);
  const std::size_t K = f.is_finite() ? *f.max_support() : f.tail_cutoff(kSpineTailTol);
  for (std::size_t c = 1; c <= K; ++c) {
    const double fc = f.mass(c);
    if (fc == 0.0) continue;
    double a_pow = 1.0;
    for (std::size_t d = 1; d <= c; ++d) {
      const double w = ratio * fc * a_pow * std::pow(b, static_cast<double>(c - d));
      s.entries.push_back({d, c, w});
      s.total += w;
      a_pow *= a;
    }
  }
  if (!f.is_finite()) {
    double listed = f.mass(0);
    for (std::size_t c = 1; c <= K; ++c) listed += f.mass(c);
    s.truncated_tail = std::max(0.0, f.total_mass() - listed);
  }
  return s;
}

}  // namespace detail

// Joint law of (D_l, C_l): the rank of the left-most child of the generation
// l - 1 spine individual that survives to generation n, and its sibling count.
inline SpineDist spine_dist(const Environment& env, std::size_t l, std::size_t n) {
  if (l < 1 || l > n) throw std::invalid_argument("l: must satisfy 1 <= l <= n");
  const auto laws = env.laws(n);
  const auto gaps = detail::log_gaps(laws, n, 1.0, 0.0);
  return detail::spine_dist(laws, l, n, gaps, detail::sweep(laws, 0, n, 0.0), detail::sweep(laws, 0, n, 1.0));
}

// ---------------------------------------------------------------------------
// Trees conditioned on {tau_a > n}

struct SpineRecord {
  std::vector<std::pair<std::size_t, std::size_t>> dc;  // (D_l, C_l), l = 1..n
  std::vector<Label> labels;                             // Lambda_l = D_1 ... D_l
};

struct ConditionedTree {
  DefectiveTree tree;
  SpineRecord spine;
};

struct ConditionedOptions {
  std::size_t extra_depth{0};        // generations grown above Lambda_n
  double budget_factor{20.0};        // rejection budget in multiples of the expected tries
};

// Construction of a tree conditioned on {tau_a > n} along the left-most
// surviving lineage. Sibling subtrees at generation l live in the shifted
// environment v_l; those left of the spine are conditioned on extinction by
// their generation n - l (tau_0 <= n - l), those to the right on no defective
// element by their generation n - l (tau_Delta > n - l). Both conditionings
// are realized by rejection against the unconditioned sampler with a budget
// of budget_factor / acceptance tries.
class ConditionedSampler {
 public:
  ConditionedSampler(const Environment& env, std::size_t n, ConditionedOptions opt = {})
      : n_{n}, opt_{opt}, laws_{env.laws(n + opt.extra_depth)} {
    const auto gaps = detail::log_gaps(laws_, n, 1.0, 0.0);
    if (gaps.front() == kNegInf) throw precondition_error("sample_conditioned: P[tau_a > n] = 0");
    const auto at0 = detail::sweep(laws_, 0, n, 0.0);
    const auto at1 = detail::sweep(laws_, 0, n, 1.0);
    for (std::size_t l = 1; l <= n; ++l) {
      auto s = detail::spine_dist(laws_, l, n, gaps, at0, at1);
      std::vector<double> cdf;
      double acc = 0.0;
      for (const auto& e : s.entries) cdf.push_back(acc += e.weight);
      spine_.push_back(std::move(s));
      spine_cdf_.push_back(std::move(cdf));
      // acceptance probabilities for subtrees founded at depth l
      left_accept_.push_back(at0.at(l));
      right_accept_.push_back(at1.at(l));
    }
  }

  std::size_t horizon() const { return n_; }
  double left_acceptance(std::size_t l) const { return left_accept_.at(l - 1); }
  double right_acceptance(std::size_t l) const { return right_accept_.at(l - 1); }

  ConditionedTree sample(RandomStream& rng) const {
    ConditionedTree out;
    const std::size_t cap = n_ + opt_.extra_depth;
    Label spine;
    for (std::size_t l = 1; l <= n_; ++l) {
      const auto& entry = draw_spine(l, rng);
      out.spine.dc.emplace_back(entry.d, entry.c);
      out.tree.expand(spine, State{entry.c});
      Label child = spine;
      child.push_back(0);
      for (std::size_t i = 1; i <= entry.c; ++i) {
        if (i == entry.d) continue;
        child.back() = static_cast<std::uint32_t>(i);
        const bool left = i < entry.d;
        out.tree.graft(child, conditioned_subtree(l, left, cap - l, rng));
      }
      spine.push_back(static_cast<std::uint32_t>(entry.d));
      out.spine.labels.push_back(spine);
    }
    const std::span<const OffspringLaw> top(laws_.data() + n_, opt_.extra_depth);
    out.tree.graft(spine, detail::sample_tree(top, opt_.extra_depth, rng));
    out.tree.normalize_graveyard();
    return out;
  }

 private:
  const SpineEntry& draw_spine(std::size_t l, RandomStream& rng) const {
    const auto& cdf = spine_cdf_[l - 1];
    const double u = rng.uniform() * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    return spine_[l - 1].entries[idx];
  }

  DefectiveTree conditioned_subtree(std::size_t l, bool left, std::size_t depth_cap, RandomStream& rng) const {
    const std::size_t m = n_ - l;
    const double p = left ? left_accept_[l - 1] : right_accept_[l - 1];
    if (!(p > 0.0)) throw precondition_error("sample_conditioned: subtree conditioning event has probability 0");
    const auto budget = static_cast<std::size_t>(std::ceil(opt_.budget_factor / p));
    const std::span<const OffspringLaw> shifted(laws_.data() + l, laws_.size() - l);
    for (std::size_t tries = 0; tries < budget; ++tries) {
      if (left) {
        DefectiveTree t = detail::sample_tree(shifted, m, rng);
        if (extinct_by(t, m)) return t;
      } else {
        DefectiveTree t = detail::sample_tree(shifted, depth_cap, rng);
        const auto d = t.graveyard_depth();
        if (!d || *d >= m) return t;
      }
    }
    throw budget_error("sample_conditioned: rejection budget of " + std::to_string(budget) + " tries exhausted at l = " +
                       std::to_string(l));
  }

  static bool extinct_by(const DefectiveTree& t, std::size_t m) {
    if (t.graveyard_depth()) return false;
    for (const auto& [l, c] : t.nodes())
      if (l.size() >= m || !c) return false;
    return true;
  }

  std::size_t n_;
  ConditionedOptions opt_;
  std::vector<OffspringLaw> laws_;
  std::vector<SpineDist> spine_;
  std::vector<std::vector<double>> spine_cdf_;
  std::vector<double> left_accept_;   // f_{l,n}(0) = P_{v_l}[tau_0 <= n - l]
  std::vector<double> right_accept_;  // f_{l,n}(1) = P_{v_l}[tau_Delta > n - l]
};

inline ConditionedTree sample_conditioned(const Environment& env, std::size_t n, RandomStream& rng,
                                          ConditionedOptions opt = {}) {
  return ConditionedSampler(env, n, opt).sample(rng);
}

inline bool survives(const DefectiveTree& t, std::size_t n) {
  const auto z = generation_size(t, n);
  return z && z->is_alive();
}

// Unconditioned DBTVEs grown to depth n until one has tau_a > n.
inline DefectiveTree rejection_conditioned(const Environment& env, std::size_t n, RandomStream& rng,
                                           std::size_t max_tries, std::size_t* tries_used = nullptr) {
  const auto laws = env.laws(n);
  const double surv = std::exp(detail::log_gap(laws, n, 1.0, 0.0));
  if (!(surv > 0.0) || 1.0 / surv > static_cast<double>(max_tries) / 10.0)
    throw precondition_error("rejection_conditioned: expected tries 1/P[tau_a > n] exceeds max_tries / 10");
  for (std::size_t k = 1; k <= max_tries; ++k) {
    DefectiveTree t = detail::sample_tree(laws, n, rng);
    if (survives(t, n)) {
      if (tries_used) *tries_used = k;
      return t;
    }
  }
  throw budget_error("rejection_conditioned: " + std::to_string(max_tries) + " tries exhausted");
}

// ---------------------------------------------------------------------------
// Exact conditional law of the height-n prefix

struct ExactTreeLaw {
  std::size_t n{0};
  std::map<std::string, double> atoms;  // prefix_key -> P[T =_n t | tau_a > n]
  std::vector<std::map<State::count_type, double>> marginals;  // z_k law, k = 0..n
  double survival{0.0};                                         // total unconditioned mass
};

inline constexpr std::size_t kDefaultEnumerationBudget = 1'000'000;

// Enumerates every prefix of height n with no defective element and z_n > 0.
inline ExactTreeLaw enumerate_conditioned(const Environment& env, std::size_t n, std::size_t maxK,
                                          std::size_t budget = kDefaultEnumerationBudget) {
  if (n == 0) throw std::invalid_argument("n: must be >= 1");
  const auto laws = env.laws(n);
  for (std::size_t g = 0; g < n; ++g) {
    const auto K = laws[g].max_support();
    if (!K || *K > maxK)
      throw precondition_error("enumerate_conditioned: law of generation " + std::to_string(g + 1) +
                               " has support beyond maxK");
  }
  ExactTreeLaw out;
  out.n = n;
  out.marginals.resize(n + 1);
  // extended-precision sums keep the many small atoms exact to ~1e-15
  std::map<std::string, long double> atoms;
  std::vector<std::map<State::count_type, long double>> marginals(n + 1);
  long double survival = 0.0L;
  std::size_t visited = 0;
  // level-by-level: counts[g] lists c for the nodes of depth g in label order
  std::vector<std::vector<std::size_t>> counts(n);
  auto emit = [&](double p) {
    DefectiveTree t;
    std::vector<Label> level{Label{}};
    for (std::size_t g = 0; g < n; ++g) {
      std::vector<Label> next;
      for (std::size_t k = 0; k < level.size(); ++k) {
        t.expand(level[k], State{counts[g][k]});
        Label child = level[k];
        child.push_back(0);
        for (std::size_t j = 1; j <= counts[g][k]; ++j) {
          child.back() = static_cast<std::uint32_t>(j);
          next.push_back(child);
        }
      }
      level = std::move(next);
    }
    atoms[prefix_key(t, n)] += p;
    const auto z = generation_sizes(t);
    for (std::size_t k = 0; k <= n; ++k) marginals[k][z[k].count()] += p;
    survival += p;
  };
  // choose c for node k of depth g given z_g nodes at that depth
  auto rec = [&](auto&& self, std::size_t g, std::size_t k, std::size_t z_g, std::size_t z_next, double p) -> void {
    if (++visited > budget) throw budget_error("enumerate_conditioned: enumeration budget exceeded");
    if (k == z_g) {
      if (g + 1 == n) {
        if (z_next > 0) emit(p);
        return;
      }
      if (z_next == 0) return;
      counts[g + 1].clear();
      self(self, g + 1, 0, z_next, 0, p);
      return;
    }
    const OffspringLaw& f = laws[g];
    for (std::size_t c = 0; c <= *f.max_support(); ++c) {
      const double w = f.mass(c);
      if (w == 0.0) continue;
      counts[g].push_back(c);
      self(self, g, k + 1, z_g, z_next + c, p * w);
      counts[g].pop_back();
    }
  };
  rec(rec, 0, 0, 1, 0, 1.0);
  if (!(survival > 0.0L)) throw precondition_error("enumerate_conditioned: P[tau_a > n] = 0");
  out.survival = static_cast<double>(survival);
  for (const auto& [k, p] : atoms) out.atoms[k] = static_cast<double>(p / survival);
  for (std::size_t k = 0; k <= n; ++k)
    for (const auto& [z, p] : marginals[k]) out.marginals[k][z] = static_cast<double>(p / survival);
  return out;
}

// ---------------------------------------------------------------------------
// Agreement of the conditioned sampler with the exact and rejection laws

struct Prop4Result {
  std::size_t samples{0};
  std::optional<double> tv_vs_exact;  // when enumeration is feasible
  double tv_sampler_vs_rejection{0.0};
  std::size_t atoms{0};
  double threshold{0.0};
  bool pass{false};
  std::size_t invalid_trees{0};
};

struct Prop4Options {
  std::size_t max_k{8};
  std::size_t enumeration_budget{kDefaultEnumerationBudget};
  std::size_t rejection_max_tries{1'000'000};
  unsigned threads{1};
  bool validate_trees{true};
};

inline constexpr std::uint64_t kConstructionStreamTag = 1;
inline constexpr std::uint64_t kRejectionStreamTag = 2;

namespace detail {

inline double tv_distance(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
  double tv = 0.0;
  auto i = p.begin();
  auto j = q.begin();
  while (i != p.end() || j != q.end()) {
    if (j == q.end() || (i != p.end() && i->first < j->first)) {
      tv += std::abs(i->second);
      ++i;
    } else if (i == p.end() || j->first < i->first) {
      tv += std::abs(j->second);
      ++j;
    } else {
      tv += std::abs(i->second - j->second);
      ++i;
      ++j;
    }
  }
  return 0.5 * tv;
}

inline std::map<std::string, double> empirical(const std::vector<std::string>& keys) {
  std::map<std::string, double> m;
  for (const auto& k : keys) m[k] += 1.0;
  for (auto& [k, v] : m) v /= static_cast<double>(keys.size());
  return m;
}

}  // namespace detail

// Empirical height-n prefix laws of the construction and of rejection
// sampling, compared with each other and with the enumerated law. Sample i
// uses RandomStream(seed).fork(tag).fork(i). Pass when every TV is at most
// max(0.01, 3 sqrt(atoms / samples)).
inline Prop4Result validate_prop4(const Environment& env, std::size_t n, std::size_t samples, std::uint64_t seed,
                                  Prop4Options opt = {}) {
  if (samples < 1) throw std::invalid_argument("samples: must be >= 1");
  Prop4Result r;
  r.samples = samples;
  std::optional<ExactTreeLaw> exact;
  try {
    exact = enumerate_conditioned(env, n, opt.max_k, opt.enumeration_budget);
  } catch (const precondition_error&) {
  } catch (const budget_error&) {
  }
  const ConditionedSampler sampler(env, n);
  const RandomStream root(seed);
  const RandomStream cs = root.fork(kConstructionStreamTag), rs = root.fork(kRejectionStreamTag);
  std::vector<std::string> built(samples), rejected(samples);
  std::vector<unsigned char> bad(samples, 0);
  detail::parallel_for(samples, opt.threads, [&](std::size_t i) {
    RandomStream a = cs.fork(i), b = rs.fork(i);
    const auto t = sampler.sample(a).tree;
    const auto u = rejection_conditioned(env, n, b, opt.rejection_max_tries);
    if (opt.validate_trees && (validate(t) || validate(u))) bad[i] = 1;
    built[i] = prefix_key(t, n);
    rejected[i] = prefix_key(u, n);
  });
  for (auto b : bad) r.invalid_trees += b;
  const auto p_built = detail::empirical(built), p_rej = detail::empirical(rejected);
  r.tv_sampler_vs_rejection = detail::tv_distance(p_built, p_rej);
  if (exact) {
    r.tv_vs_exact = detail::tv_distance(p_built, exact->atoms);
    r.atoms = exact->atoms.size();
  } else {
    std::set<std::string> keys;
    for (const auto& [k, v] : p_built) keys.insert(k);
    for (const auto& [k, v] : p_rej) keys.insert(k);
    r.atoms = keys.size();
  }
  r.threshold = std::max(0.01, 3.0 * std::sqrt(static_cast<double>(r.atoms) / static_cast<double>(samples)));
  r.pass = r.invalid_trees == 0 && r.tv_sampler_vs_rejection <= r.threshold &&
           (!r.tv_vs_exact || *r.tv_vs_exact <= r.threshold);
  return r;
}

}  // namespace dgw
