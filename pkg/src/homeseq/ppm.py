"""Frequency-trie pattern models with prediction by partial matching.

Two frontends feed the trie:

* ALZ: an LZ78 parse fixes the window depth D; a window of the last D
  symbols slides over the sequence and, at each position, every suffix of
  the window bumps the count of its end node.  A node's count therefore
  equals the number of positions where its path occurs ending there.
* SPEED: the sequence is split greedily into maximal episodes containing
  no repeated symbol; every suffix of every episode is inserted with count
  increments along the whole path, so a node's count equals the number of
  occurrences of its path inside episodes.

The next-symbol distribution blends match counts across context orders
with escape mass 1/(N+1) flowing to the next shorter context, bottoming
out at the uniform distribution over the alphabet.
"""

from __future__ import annotations

import numpy as np


class TrieNode:
    __slots__ = ("count", "children")

    def __init__(self):
        self.count = 0
        self.children = {}

    def child(self, symbol):
        node = self.children.get(symbol)
        if node is None:
            node = self.children[symbol] = TrieNode()
        return node


class FrequencyTrie:
    """Rooted count trie over a fixed alphabet, with maximum depth D."""

    def __init__(self, alphabet, depth):
        self.alphabet = tuple(alphabet)
        if not self.alphabet:
            raise ValueError("alphabet is empty")
        self.alphabet_index = {s: i for i, s in enumerate(self.alphabet)}
        self.depth = depth
        self.root = TrieNode()

    def insert_terminal(self, path):
        """Bump the count of the node at the end of ``path`` only."""
        node = self.root
        for symbol in path:
            node = node.child(symbol)
        node.count += 1

    def insert_path(self, path):
        """Bump the count of every node along ``path``."""
        node = self.root
        for symbol in path:
            node = node.child(symbol)
            node.count += 1

    def node(self, context):
        node = self.root
        for symbol in context:
            node = node.children.get(symbol)
            if node is None:
                return None
        return node

    def count(self, path):
        node = self.node(path)
        return 0 if node is None else node.count

    def dump(self):
        """Indented symbol:count text, children in alphabet order."""
        lines = []

        def walk(node, indent):
            for symbol in sorted(node.children, key=self.alphabet_index.get):
                child = node.children[symbol]
                lines.append("  " * indent + f"{symbol}:{child.count}")
                walk(child, indent + 1)

        walk(self.root, 0)
        return "\n".join(lines) + ("\n" if lines else "")


def lz78_phrases(symbols):
    """Classic LZ78 phrase dictionary (completed phrases, in parse order)."""
    phrases = []
    known = set()
    current = []
    for symbol in symbols:
        current.append(symbol)
        key = tuple(current)
        if key not in known:
            known.add(key)
            phrases.append(tuple(current))
            current = []
    return phrases


def episodes(symbols):
    """Greedy split into maximal windows without a repeated symbol."""
    out = []
    current = []
    seen = set()
    for symbol in symbols:
        if symbol in seen:
            out.append(current)
            current = []
            seen = set()
        current.append(symbol)
        seen.add(symbol)
    if current:
        out.append(current)
    return out


def _segments(symbols):
    """Accept a single sequence or a list of disjoint segments."""
    if symbols and isinstance(symbols[0], (list, tuple)):
        return [list(seg) for seg in symbols]
    return [list(symbols)]


def build_trie_alz(symbols, alphabet=None):
    """Active-LeZi style trie: sliding window of LZ78 depth, suffix counts.

    ``symbols`` may be a list of tokens or a list of contiguous segments
    (windows never span segment boundaries).
    """
    segments = _segments(symbols)
    if not any(segments):
        raise ValueError("empty symbol sequence")
    if alphabet is None:
        alphabet = sorted({s for seg in segments for s in seg})
    depth = max((len(p) for seg in segments for p in lz78_phrases(seg)), default=1)
    trie = FrequencyTrie(alphabet, depth)
    for seg in segments:
        for i in range(len(seg)):
            window = seg[max(0, i - depth + 1):i + 1]
            for a in range(len(window)):
                trie.insert_terminal(window[a:])
    return trie


def build_trie_speed(symbols, alphabet=None):
    """SPEED-style trie: suffixes of maximal repeat-free episodes."""
    segments = _segments(symbols)
    if not any(segments):
        raise ValueError("empty symbol sequence")
    if alphabet is None:
        alphabet = sorted({s for seg in segments for s in seg})
    all_episodes = [ep for seg in segments for ep in episodes(seg)]
    depth = max(len(ep) for ep in all_episodes)
    trie = FrequencyTrie(alphabet, depth)
    for episode in all_episodes:
        for a in range(len(episode)):
            trie.insert_path(episode[a:])
    return trie


def build_trie(frontend, symbols, alphabet=None):
    if frontend == "alz":
        return build_trie_alz(symbols, alphabet)
    if frontend == "speed":
        return build_trie_speed(symbols, alphabet)
    raise ValueError(f"unknown frontend {frontend!r}")


def ppm_distribution(trie, context):
    """Escape-blended next-symbol probabilities over the trie's alphabet.

    P_k(s) = n(c_k, s)/(N(c_k)+1) + P_{k-1}(s)/(N(c_k)+1) with the context
    shortened from the left, starting at order min(|context|, D-1), with
    P_{-1} uniform.  The result is strictly positive and sums to 1.
    """
    sigma = len(trie.alphabet)
    probs = np.full(sigma, 1.0 / sigma)
    context = list(context)[max(0, len(context) - (trie.depth - 1)):]
    for k in range(len(context) + 1):
        node = trie.node(context[len(context) - k:])
        if node is None:
            continue
        counts = np.zeros(sigma)
        for symbol, child in node.children.items():
            counts[trie.alphabet_index[symbol]] = child.count
        total = counts.sum()
        probs = (counts + probs) / (total + 1.0)
    return probs


def predict_next(trie, context):
    """Most probable next symbol; ties resolve to the lowest alphabet index."""
    return trie.alphabet[int(np.argmax(ppm_distribution(trie, context)))]
