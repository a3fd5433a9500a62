"""The augmentation-tree genome.

A tree is a full binary tree of uniform depth whose nodes carry operator tags
and whose internal nodes carry branching probabilities summing to 1.  Applying
a tree samples one root-to-leaf path and composes the operators along it.

Two on-disk formats:
  text  ->  Tree := OpName | "(" OpName "," Prob "," Tree "," Prob "," Tree ")"
  json  ->  nested {"op", "p_left", "p_right", "left", "right"}
The text format writes probabilities with six decimals and spells NoOp as
"None"; internally the canonical tag is always "NoOp".
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidTreeError, TreeParseError
from .rng import derive_rng

BUILTIN_OPERATORS = ("Canny", "Segment", "Depth", "Color", "NeRF", "Classical", "NoOp")

PROB_TOLERANCE = 1e-9

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?")


def canonical_op(name: str) -> str:
    """Map the text alias "None" to the internal tag "NoOp"."""
    return "NoOp" if name == "None" else name


def text_op(tag: str) -> str:
    return "None" if tag == "NoOp" else tag


@dataclass(frozen=True)
class TreeNode:
    op: str
    p_left: float | None = None
    p_right: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None and self.right is None


@dataclass(frozen=True)
class AugmentationTree:
    """Genome wrapper; ``depth`` counts operators on any root-to-leaf path."""

    root: TreeNode
    depth: int

    @classmethod
    def from_root(cls, root: TreeNode) -> "AugmentationTree":
        tree = cls(root=root, depth=_leftmost_depth(root))
        validate_tree(tree)
        return tree


def _leftmost_depth(node: TreeNode) -> int:
    depth = 1
    while node.left is not None:
        node = node.left
        depth += 1
    return depth


def validate_tree(
    tree: AugmentationTree,
    max_depth: int | None = None,
    known_ops: set[str] | frozenset[str] | None = None,
) -> None:
    """Check every structural invariant; raise InvalidTreeError on the first hit.

    ``known_ops`` is optional because operator registration is only binding at
    application time; when given, unknown tags are rejected here.
    """
    leaf_depths: set[int] = set()

    def walk(node: TreeNode, depth: int) -> None:
        if not node.op or not _NAME_RE.fullmatch(node.op):
            raise InvalidTreeError(f"malformed operator name {node.op!r}")
        if known_ops is not None and node.op not in known_ops:
            raise InvalidTreeError(f"unknown operator {node.op!r}")
        if node.is_leaf:
            leaf_depths.add(depth)
            return
        if node.left is None or node.right is None:
            raise InvalidTreeError("ragged shape: internal node with a single child")
        if node.p_left is None or node.p_right is None:
            raise InvalidTreeError("internal node missing branch probabilities")
        for p in (node.p_left, node.p_right):
            if not 0.0 <= p <= 1.0:
                raise InvalidTreeError(f"branch probability {p} outside [0, 1]")
        if abs(node.p_left + node.p_right - 1.0) > PROB_TOLERANCE:
            raise InvalidTreeError(
                f"branch probabilities sum to {node.p_left + node.p_right!r}, not 1"
            )
        walk(node.left, depth + 1)
        walk(node.right, depth + 1)

    walk(tree.root, 1)
    if len(leaf_depths) > 1:
        raise InvalidTreeError(f"ragged shape: leaves at depths {sorted(leaf_depths)}")
    actual = leaf_depths.pop()
    if actual != tree.depth:
        raise InvalidTreeError(f"declared depth {tree.depth} but leaves sit at depth {actual}")
    if max_depth is not None and actual > max_depth:
        raise InvalidTreeError(f"depth {actual} exceeds maximum {max_depth}")


def sample_path(tree: AugmentationTree, rng: np.random.Generator) -> list[str]:
    """One root-to-leaf operator sequence; left edge taken with prob p_left."""
    node = tree.root
    path = [node.op]
    while not node.is_leaf:
        node = node.left if rng.random() < node.p_left else node.right
        path.append(node.op)
    return path


def apply_tree(tree, img, registry, rng: np.random.Generator):
    """Transform ``img`` by the operators along one sampled path, root first.

    The generator is split hierarchically: one stream picks the path, and each
    path position gets its own independent stream, so registering extra
    operators never perturbs unrelated draws.
    """
    base = int(rng.integers(0, 2**63))
    path = sample_path(tree, derive_rng(base, "path"))
    out = img
    for i, op in enumerate(path):
        out = registry.apply(op, out, derive_rng(base, "op", i, op))
    return out


def reachable_ops(tree: AugmentationTree, min_edge_prob: float = 0.0) -> set[str]:
    """Operator tags on paths whose every edge probability exceeds the cutoff."""
    found: set[str] = set()

    def walk(node: TreeNode) -> None:
        found.add(node.op)
        if node.is_leaf:
            return
        if node.p_left > min_edge_prob:
            walk(node.left)
        if node.p_right > min_edge_prob:
            walk(node.right)

    walk(tree.root)
    return found


def modal_path(tree: AugmentationTree) -> list[str]:
    """The single most probable root-to-leaf path (ties go left)."""
    node = tree.root
    path = [node.op]
    while not node.is_leaf:
        node = node.left if node.p_left >= node.p_right else node.right
        path.append(node.op)
    return path


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, literal: str) -> None:
        self.skip_ws()
        if not self.text.startswith(literal, self.pos):
            raise TreeParseError(self.pos, f"'{literal}'")
        self.pos += len(literal)

    def name(self) -> str:
        self.skip_ws()
        m = _NAME_RE.match(self.text, self.pos)
        if m is None:
            raise TreeParseError(self.pos, "operator name")
        self.pos = m.end()
        return m.group()

    def number(self) -> float:
        self.skip_ws()
        m = _NUMBER_RE.match(self.text, self.pos)
        if m is None:
            raise TreeParseError(self.pos, "probability")
        self.pos = m.end()
        return float(m.group())

    def node(self) -> TreeNode:
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] == "(":
            self.pos += 1
            op = canonical_op(self.name())
            self.expect(",")
            p_left = self.number()
            self.expect(",")
            left = self.node()
            self.expect(",")
            p_right = self.number()
            self.expect(",")
            right = self.node()
            self.expect(")")
            return TreeNode(op=op, p_left=p_left, p_right=p_right, left=left, right=right)
        return TreeNode(op=canonical_op(self.name()))

    def end(self) -> None:
        self.skip_ws()
        if self.pos != len(self.text):
            raise TreeParseError(self.pos, "end of input")


def parse_tree(text: str) -> AugmentationTree:
    """Parse the text format and validate the result."""
    parser = _Parser(text)
    root = parser.node()
    parser.end()
    tree = AugmentationTree(root=root, depth=_leftmost_depth(root))
    validate_tree(tree)
    return tree


def _node_to_text(node: TreeNode) -> str:
    if node.is_leaf:
        return text_op(node.op)
    # Emit p_left at six decimals and p_right as its decimal complement so the
    # pair still sums to 1 within tolerance after a parse round-trip.
    p_left = float(f"{node.p_left:.6f}")
    return "({}, {:.6f}, {}, {:.6f}, {})".format(
        text_op(node.op),
        p_left,
        _node_to_text(node.left),
        1.0 - p_left,
        _node_to_text(node.right),
    )


def _node_to_obj(node: TreeNode) -> dict:
    return {
        "op": node.op,
        "p_left": node.p_left,
        "p_right": node.p_right,
        "left": _node_to_obj(node.left) if node.left is not None else None,
        "right": _node_to_obj(node.right) if node.right is not None else None,
    }


def _node_from_obj(obj: dict) -> TreeNode:
    if not isinstance(obj, dict) or "op" not in obj:
        raise InvalidTreeError("JSON tree node must be an object with an 'op' field")
    left = obj.get("left")
    right = obj.get("right")
    return TreeNode(
        op=canonical_op(str(obj["op"])),
        p_left=obj.get("p_left"),
        p_right=obj.get("p_right"),
        left=_node_from_obj(left) if left is not None else None,
        right=_node_from_obj(right) if right is not None else None,
    )


def serialize_tree(tree: AugmentationTree, format: str = "text") -> str:
    if format == "text":
        return _node_to_text(tree.root)
    if format == "json":
        return json.dumps(_node_to_obj(tree.root), indent=2)
    raise ValueError(f"unknown tree format {format!r}")


def parse_tree_json(text: str) -> AugmentationTree:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeParseError(exc.pos, "valid JSON") from exc
    root = _node_from_obj(obj)
    tree = AugmentationTree(root=root, depth=_leftmost_depth(root))
    validate_tree(tree)
    return tree


def load_tree_text(text: str) -> AugmentationTree:
    """Parse either on-disk format, sniffing JSON by its leading brace."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return parse_tree_json(text)
    return parse_tree(stripped.strip())


def trees_equal(a: AugmentationTree, b: AugmentationTree, prob_tol: float = 0.0) -> bool:
    """Structural equality, optionally tolerant on branch probabilities."""

    def eq(x: TreeNode | None, y: TreeNode | None) -> bool:
        if x is None or y is None:
            return x is y
        if x.op != y.op or x.is_leaf != y.is_leaf:
            return False
        if not x.is_leaf:
            if abs(x.p_left - y.p_left) > prob_tol or abs(x.p_right - y.p_right) > prob_tol:
                return False
        return eq(x.left, y.left) and eq(x.right, y.right)

    return a.depth == b.depth and eq(a.root, b.root)
