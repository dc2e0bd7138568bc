#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace reasongr {

// Prefix tree over sequences of `Key`. Node 0 is the root. A node is
// terminal when a complete registered sequence ends there; its payload is the
// index of that sequence in the owner's table. Children are kept sorted by key
// so enumeration order is deterministic.
template <typename Key>
class PrefixTrie {
 public:
  struct Node {
    std::vector<std::pair<Key, std::size_t>> children;
    std::optional<std::size_t> payload;
    bool terminal() const { return payload.has_value(); }
  };

  PrefixTrie() : nodes_(1) {}

  // Returns false (and leaves the trie untouched) when the sequence is
  // already present.
  bool insert(std::span<const Key> seq, std::size_t payload) {
    std::size_t node = 0;
    for (const Key& k : seq) {
      auto next = child(node, k);
      if (!next) {
        nodes_.emplace_back();
        std::size_t created = nodes_.size() - 1;
        auto& kids = nodes_[node].children;
        auto pos = std::lower_bound(kids.begin(), kids.end(), k,
                                    [](const auto& e, const Key& key) { return e.first < key; });
        kids.insert(pos, {k, created});
        next = created;
      }
      node = *next;
    }
    if (nodes_[node].terminal()) return false;
    nodes_[node].payload = payload;
    ++terminal_count_;
    return true;
  }

  std::optional<std::size_t> child(std::size_t node, const Key& k) const {
    const auto& kids = nodes_[node].children;
    auto pos = std::lower_bound(kids.begin(), kids.end(), k,
                                [](const auto& e, const Key& key) { return e.first < key; });
    if (pos == kids.end() || !(pos->first == k)) return std::nullopt;
    return pos->second;
  }

  // Node reached by following `prefix` from the root, if any.
  std::optional<std::size_t> find(std::span<const Key> prefix) const {
    std::size_t node = 0;
    for (const Key& k : prefix) {
      auto next = child(node, k);
      if (!next) return std::nullopt;
      node = *next;
    }
    return node;
  }

  const Node& node(std::size_t id) const { return nodes_[id]; }
  static constexpr std::size_t root() { return 0; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t terminal_count() const { return terminal_count_; }
  bool empty() const { return terminal_count_ == 0; }

  // Every root-to-terminal path with its payload, in lexicographic key order.
  std::vector<std::pair<std::vector<Key>, std::size_t>> enumerate() const {
    std::vector<std::pair<std::vector<Key>, std::size_t>> out;
    std::vector<Key> path;
    walk(0, path, out);
    return out;
  }

 private:
  void walk(std::size_t node, std::vector<Key>& path,
            std::vector<std::pair<std::vector<Key>, std::size_t>>& out) const {
    if (nodes_[node].terminal()) out.emplace_back(path, *nodes_[node].payload);
    for (const auto& [k, next] : nodes_[node].children) {
      path.push_back(k);
      walk(next, path, out);
      path.pop_back();
    }
  }

  std::vector<Node> nodes_;
  std::size_t terminal_count_ = 0;
};

}  // namespace reasongr
