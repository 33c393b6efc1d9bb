#pragma once

// Offline checks over the per-shard local chains of a finished run: the
// causal relation ->_L, validity (no causal cycle), shard-coherence, a
// blockchain serialization B, and a sequential replay of B.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lockless/core.hpp"
#include "lockless/destination.hpp"

namespace lockless {

struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense bitset row.
class BitRow {
 public:
  BitRow() = default;
  explicit BitRow(std::size_t n) : words_((n + 63) / 64, 0) {}
  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  [[nodiscard]] bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
  BitRow& operator|=(const BitRow& o) {
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= o.words_[k];
    return *this;
  }
  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t k = 0; k < words_.size(); ++k) {
      auto w = words_[k];
      while (w) {
        auto bit = static_cast<std::size_t>(__builtin_ctzll(w));
        f(k * 64 + bit);
        w &= w - 1;
      }
    }
  }

 private:
  std::vector<std::uint64_t> words_;
};

struct GraphNode {
  SubtxKey key;
  ShardIndex shard = 0;
  std::size_t position = 0;  // index in the shard's released chain
  bool writes = false;
};

class CausalGraph {
 public:
  std::vector<GraphNode> nodes;
  std::vector<std::vector<std::size_t>> succ;  // generating edges
  std::vector<std::pair<std::size_t, std::size_t>> intra;  // intra-chain conflict pairs (earlier, later)
  std::map<SubtxKey, std::size_t> index;
  std::map<TxId, std::vector<std::size_t>> by_tx;

  /// u ->_L v in the transitive closure.
  [[nodiscard]] bool causes(std::size_t u, std::size_t v) const { return reach_[u].test(v); }
  [[nodiscard]] const BitRow& reach(std::size_t u) const { return reach_[u]; }
  [[nodiscard]] std::size_t size() const { return nodes.size(); }

  void add_edge(std::size_t u, std::size_t v) { succ[u].push_back(v); }

  /// Transitive closure via SCC condensation, one bitset row per node.
  void close() {
    const auto n = nodes.size();
    for (auto& s : succ) {
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    comp_ = tarjan();
    std::size_t nc = 0;
    for (auto c : comp_) nc = std::max(nc, c + 1);
    std::vector<std::vector<std::size_t>> members(nc);
    for (std::size_t u = 0; u < n; ++u) members[comp_[u]].push_back(u);
    // Tarjan numbers components in reverse topological order: successors of
    // a component always have smaller ids.
    std::vector<BitRow> creach(nc, BitRow(n));
    for (std::size_t c = 0; c < nc; ++c) {
      bool cyclic = members[c].size() > 1;
      for (auto u : members[c])
        for (auto v : succ[u]) {
          if (comp_[v] == c) {
            cyclic = true;
            continue;
          }
          creach[c] |= creach[comp_[v]];
          for (auto m : members[comp_[v]]) creach[c].set(m);
        }
      if (cyclic)
        for (auto m : members[c]) creach[c].set(m);
    }
    reach_.assign(n, BitRow(n));
    for (std::size_t u = 0; u < n; ++u) reach_[u] = creach[comp_[u]];
  }

  [[nodiscard]] const std::vector<std::size_t>& components() const { return comp_; }

 private:
  std::vector<std::size_t> tarjan() const {
    const auto n = nodes.size();
    constexpr auto kUnset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> idx(n, kUnset), low(n, 0), comp(n, kUnset);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::size_t counter = 0, ncomp = 0;
    struct Frame {
      std::size_t u;
      std::size_t next;
    };
    for (std::size_t root = 0; root < n; ++root) {
      if (idx[root] != kUnset) continue;
      std::vector<Frame> call{{root, 0}};
      idx[root] = low[root] = counter++;
      stack.push_back(root);
      on_stack[root] = true;
      while (!call.empty()) {
        auto& f = call.back();
        if (f.next < succ[f.u].size()) {
          auto v = succ[f.u][f.next++];
          if (idx[v] == kUnset) {
            idx[v] = low[v] = counter++;
            stack.push_back(v);
            on_stack[v] = true;
            call.push_back({v, 0});
          } else if (on_stack[v]) {
            low[f.u] = std::min(low[f.u], idx[v]);
          }
          continue;
        }
        auto u = f.u;
        if (low[u] == idx[u]) {
          std::size_t w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp[w] = ncomp;
          } while (w != u);
          ++ncomp;
        }
        call.pop_back();
        if (!call.empty()) low[call.back().u] = std::min(low[call.back().u], low[u]);
      }
    }
    return comp;
  }

  std::vector<std::size_t> comp_;
  std::vector<BitRow> reach_;
};

/// Two subtransactions in one chain conflict when they access the same
/// object and at least one of them writes it.
[[nodiscard]] inline bool conflicts(const GraphNode& a, const GraphNode& b) {
  return a.shard == b.shard && a.key.object == b.key.object && (a.writes || b.writes);
}

/// Builds ->_L from released chain entries: intra-chain conflict edges, the
/// two cross-chain lifts, then the transitive closure.
[[nodiscard]] inline CausalGraph build_graph(const std::vector<std::vector<ChainEntry>>& chains) {
  CausalGraph g;
  for (std::size_t s = 0; s < chains.size(); ++s) {
    for (std::size_t pos = 0; pos < chains[s].size(); ++pos) {
      const auto& e = chains[s][pos];
      if (e.status != EntryStatus::Released)
        throw StructuralError("chain " + std::to_string(s) + " holds a non-released entry");
      if (!e.subtx) throw StructuralError("chain entry without subtransaction");
      auto key = e.key();
      if (g.index.contains(key))
        throw StructuralError("duplicate subtransaction " + to_string(key.tx) + "/" + key.object);
      g.index[key] = g.nodes.size();
      g.by_tx[key.tx].push_back(g.nodes.size());
      g.nodes.push_back({key, static_cast<ShardIndex>(s), pos, e.subtx->writes()});
    }
  }
  g.succ.assign(g.nodes.size(), {});

  // Per (shard, object) histories in chain order.
  std::map<std::pair<ShardIndex, AccountId>, std::vector<std::size_t>> history;
  for (std::size_t u = 0; u < g.nodes.size(); ++u)
    history[{g.nodes[u].shard, g.nodes[u].key.object}].push_back(u);
  for (auto& [where, list] : history) {
    std::sort(list.begin(), list.end(),
              [&](std::size_t a, std::size_t b) { return g.nodes[a].position < g.nodes[b].position; });
    for (std::size_t i = 0; i < list.size(); ++i)
      for (std::size_t j = i + 1; j < list.size(); ++j)
        if (conflicts(g.nodes[list[i]], g.nodes[list[j]])) g.intra.emplace_back(list[i], list[j]);
  }

  for (auto [a, b] : g.intra) {
    g.add_edge(a, b);
    // T_{i,a} -> T_{j,a} lifts to every sibling of T_j, and every sibling of
    // T_i causes T_{j,a}.
    for (auto sib : g.by_tx.at(g.nodes[b].key.tx))
      if (sib != b) g.add_edge(a, sib);
    for (auto sib : g.by_tx.at(g.nodes[a].key.tx))
      if (sib != a) g.add_edge(sib, b);
  }
  g.close();
  return g;
}

struct ValidityResult {
  bool ok = true;
  std::vector<SubtxKey> cycle;  // a_1 .. a_l with a_1 == a_l
};

/// Validity: no subtransaction causes itself. On failure returns a shortest
/// cycle through the first offending node.
[[nodiscard]] inline ValidityResult check_valid(const CausalGraph& g) {
  ValidityResult r;
  for (std::size_t u = 0; u < g.size(); ++u) {
    if (!g.causes(u, u)) continue;
    r.ok = false;
    // BFS over generating edges from u back to u.
    constexpr auto kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> parent(g.size(), kNone);
    std::queue<std::size_t> q;
    q.push(u);
    std::size_t last = kNone;
    while (!q.empty() && last == kNone) {
      auto x = q.front();
      q.pop();
      for (auto y : g.succ[x]) {
        if (y == u) {
          last = x;
          break;
        }
        if (parent[y] == kNone) {
          parent[y] = x;
          q.push(y);
        }
      }
    }
    std::vector<std::size_t> path{u};
    for (auto x = last; x != u; x = parent[x]) path.push_back(x);
    path.push_back(u);
    std::reverse(path.begin() + 1, path.end() - 1);
    for (auto x : path) r.cycle.push_back(g.nodes[x].key);
    return r;
  }
  return r;
}

struct CoherenceViolation {
  TxId earlier;  // T_i with T_{i,.} ->_L T_{j,.}
  TxId later;
  ShardIndex shard = 0;
  AccountId object;
};

struct CoherenceResult {
  bool ok = true;
  std::optional<CoherenceViolation> violation;
};

/// Shard-coherence: whenever T_{i,.} ->_L T_{j,.}, every conflicting pair of
/// their subtransactions is ordered T_i first in its chain.
[[nodiscard]] inline CoherenceResult check_shard_coherence(const CausalGraph& g) {
  CoherenceResult r;
  for (auto [a, b] : g.intra) {
    const auto& first = g.nodes[a].key.tx;   // precedes in the chain
    const auto& second = g.nodes[b].key.tx;
    if (first == second) continue;
    // Violation if some subtransaction of `second` causes one of `first`.
    bool reversed = false;
    const auto& targets = g.by_tx.at(first);
    for (auto u : g.by_tx.at(second)) {
      for (auto v : targets)
        if (g.causes(u, v)) {
          reversed = true;
          break;
        }
      if (reversed) break;
    }
    if (reversed) {
      r.ok = false;
      r.violation = CoherenceViolation{second, first, g.nodes[a].shard, g.nodes[a].key.object};
      return r;
    }
  }
  return r;
}

struct SerializationResult {
  bool ok = true;
  std::vector<TxId> order;
  std::vector<TxId> cycle;  // on failure
};

/// Contracts each transaction to one node and topologically sorts, smallest
/// TxId first among ready transactions.
[[nodiscard]] inline SerializationResult serialize(const CausalGraph& g) {
  SerializationResult r;
  std::map<TxId, std::size_t> tx_index;
  std::vector<TxId> txs;
  for (const auto& [tx, nodes] : g.by_tx) {
    tx_index[tx] = txs.size();
    txs.push_back(tx);
  }
  const auto m = txs.size();
  std::vector<std::vector<std::size_t>> out(m);
  std::vector<std::size_t> indegree(m, 0);
  for (std::size_t u = 0; u < g.size(); ++u)
    for (auto v : g.succ[u]) {
      auto a = tx_index.at(g.nodes[u].key.tx);
      auto b = tx_index.at(g.nodes[v].key.tx);
      if (a != b) out[a].push_back(b);
    }
  for (auto& o : out) {
    std::sort(o.begin(), o.end());
    o.erase(std::unique(o.begin(), o.end()), o.end());
    for (auto b : o) ++indegree[b];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t a = 0; a < m; ++a)
    if (indegree[a] == 0) ready.push(a);  // indices follow TxId order
  std::vector<bool> placed(m, false);
  while (!ready.empty()) {
    auto a = ready.top();
    ready.pop();
    placed[a] = true;
    r.order.push_back(txs[a]);
    for (auto b : out[a])
      if (--indegree[b] == 0) ready.push(b);
  }
  if (r.order.size() == m) return r;

  r.ok = false;
  // Walk backwards through unplaced predecessors until a node repeats.
  std::vector<std::vector<std::size_t>> in(m);
  for (std::size_t a = 0; a < m; ++a)
    for (auto b : out[a])
      if (!placed[a] && !placed[b]) in[b].push_back(a);
  std::size_t start = 0;
  while (placed[start]) ++start;
  std::vector<std::size_t> seen_at(m, static_cast<std::size_t>(-1));
  std::vector<std::size_t> walk;
  auto x = start;
  while (seen_at[x] == static_cast<std::size_t>(-1)) {
    seen_at[x] = walk.size();
    walk.push_back(x);
    x = in[x].front();
  }
  std::vector<std::size_t> cyc(walk.begin() + static_cast<std::ptrdiff_t>(seen_at[x]), walk.end());
  std::reverse(cyc.begin(), cyc.end());
  for (auto a : cyc) r.cycle.push_back(txs[a]);
  r.cycle.push_back(r.cycle.front());
  return r;
}

/// True when `order` respects every causal edge at transaction level and
/// lists each transaction once.
[[nodiscard]] inline bool respects_edges(const CausalGraph& g, const std::vector<TxId>& order) {
  std::map<TxId, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i)
    if (!pos.emplace(order[i], i).second) return false;
  if (pos.size() != g.by_tx.size()) return false;
  for (std::size_t u = 0; u < g.size(); ++u) {
    bool ok = true;
    g.reach(u).for_each([&](std::size_t v) {
      const auto& a = g.nodes[u].key.tx;
      const auto& b = g.nodes[v].key.tx;
      if (a != b && pos.at(a) >= pos.at(b)) ok = false;
    });
    if (!ok) return false;
  }
  return true;
}

struct ReplayResult {
  BalanceMap balances;
  std::vector<std::string> violations;
};

/// Sequential execution of B from the initial balances. A transaction applies
/// when all its conditions hold and no balance goes negative; every
/// transaction in B committed in the protocol, so a failure is a violation.
[[nodiscard]] inline ReplayResult oracle_replay(const std::vector<TxId>& order, BalanceMap initial,
                                                const std::map<TxId, Transaction>& transactions) {
  ReplayResult r;
  r.balances = std::move(initial);
  for (const auto& id : order) {
    auto it = transactions.find(id);
    if (it == transactions.end()) {
      r.violations.push_back("transaction " + to_string(id) + " is not in the workload");
      continue;
    }
    const auto& tx = it->second;
    std::string failure;
    for (const auto& c : tx.conditions) {
      auto b = r.balances.find(c.account);
      if (b == r.balances.end()) {
        failure = "unknown account " + c.account;
        break;
      }
      if (!evaluate_condition(c, VersionedObject{c.account, b->second, 0})) {
        failure = "condition " + c.account + " " + std::string(to_string(c.comparator)) + " " +
                  std::to_string(c.amount) + " fails at balance " + std::to_string(b->second);
        break;
      }
    }
    if (failure.empty()) {
      for (const auto& [acct, delta] : account_deltas(tx)) {
        auto b = r.balances.find(acct);
        if (b == r.balances.end()) {
          failure = "unknown account " + acct;
          break;
        }
        if (b->second + delta < 0) {
          failure = "update drives " + acct + " negative";
          break;
        }
      }
    }
    if (!failure.empty()) {
      r.violations.push_back("committed transaction " + to_string(id) + " invalid at its replay position: " +
                             failure);
      continue;
    }
    for (const auto& [acct, delta] : account_deltas(tx)) r.balances[acct] += delta;
  }
  return r;
}

struct VerifyReport {
  bool valid = false;
  bool shard_coherent = false;
  bool serialized = false;
  std::vector<TxId> serialization;
  bool replay_match = false;
  std::vector<std::string> violations;

  [[nodiscard]] bool ok() const {
    return valid && shard_coherent && serialized && replay_match && violations.empty();
  }
};

/// Full post-run check. `final_balances` are the balances the run ended with.
[[nodiscard]] inline VerifyReport verify(const std::vector<std::vector<ChainEntry>>& chains,
                                         const BalanceMap& initial,
                                         const std::map<TxId, Transaction>& transactions,
                                         const BalanceMap& final_balances) {
  VerifyReport rep;
  CausalGraph g;
  try {
    g = build_graph(chains);
  } catch (const StructuralError& e) {
    rep.violations.push_back(std::string("structural: ") + e.what());
    return rep;
  }
  auto v = check_valid(g);
  rep.valid = v.ok;
  if (!v.ok) {
    std::ostringstream os;
    os << "causal cycle:";
    for (const auto& k : v.cycle) os << ' ' << to_string(k.tx) << '/' << k.object;
    rep.violations.push_back(os.str());
  }
  auto c = check_shard_coherence(g);
  rep.shard_coherent = c.ok;
  if (!c.ok)
    rep.violations.push_back("shard-coherence: " + to_string(c.violation->earlier) + " causes " +
                             to_string(c.violation->later) + " but follows it on shard " +
                             std::to_string(c.violation->shard) + " object " + c.violation->object);
  auto s = serialize(g);
  rep.serialized = s.ok;
  if (!s.ok) {
    std::ostringstream os;
    os << "no serialization; transaction cycle:";
    for (const auto& t : s.cycle) os << ' ' << to_string(t);
    rep.violations.push_back(os.str());
    return rep;
  }
  rep.serialization = s.order;
  auto replay = oracle_replay(s.order, initial, transactions);
  for (auto& msg : replay.violations) rep.violations.push_back(std::move(msg));
  rep.replay_match = replay.balances == final_balances;
  if (!rep.replay_match) {
    for (const auto& [acct, bal] : replay.balances) {
      auto it = final_balances.find(acct);
      if (it == final_balances.end() || it->second != bal) {
        rep.violations.push_back("replay balance mismatch at " + acct + ": replay " + std::to_string(bal) +
                                 ", run " + (it == final_balances.end() ? "missing" : std::to_string(it->second)));
        break;
      }
    }
  }
  return rep;
}

[[nodiscard]] inline std::map<TxId, Transaction> index_transactions(const std::vector<Transaction>& txs) {
  std::map<TxId, Transaction> m;
  for (const auto& t : txs) m.emplace(t.id, t);
  return m;
}

}  // namespace lockless
