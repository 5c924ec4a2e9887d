"""
Expression Nodes
Immutable syntax tree for scalar functions of x1..xn

Sums of many terms parse into left-leaning chains as deep as the term count,
so every walk over a tree here uses an explicit stack.
"""

from dataclasses import dataclass

FUNCTIONS = ('sin', 'cos', 'exp', 'log', 'sqrt', 'tanh')
BINARY_OPERATORS = ('+', '-', '*', '/', '^')


class Node:
    """Base class with structural equality and hashing"""

    __slots__ = ()

    def __eq__(self, other):
        if not isinstance(other, Node):
            return NotImplemented
        return same_tree(self, other)

    def __hash__(self):
        return tree_hash(self)


@dataclass(frozen=True, eq=False)
class Constant(Node):
    """Decimal literal"""

    value: float


@dataclass(frozen=True, eq=False)
class Variable(Node):
    """Positional variable x<index>, index >= 1"""

    index: int


@dataclass(frozen=True, eq=False)
class Unary(Node):
    """
    Unary application

    name is 'neg' for unary minus or one of FUNCTIONS.
    """

    name: str
    operand: Node


@dataclass(frozen=True, eq=False)
class Binary(Node):
    """Binary operation, op in BINARY_OPERATORS"""

    op: str
    left: Node
    right: Node


def children(node):
    """Direct operands of a node, left to right"""
    if isinstance(node, Binary):
        return (node.left, node.right)
    if isinstance(node, Unary):
        return (node.operand,)
    return ()


def _label(node):
    if isinstance(node, Constant):
        return ('constant', node.value)
    if isinstance(node, Variable):
        return ('variable', node.index)
    if isinstance(node, Unary):
        return ('unary', node.name)
    if isinstance(node, Binary):
        return ('binary', node.op)
    raise TypeError(f"Unknown node type: {type(node).__name__}")


def postorder(node):
    """
    Nodes of a tree in left-to-right post-order

    Args:
        node: Root node

    Returns:
        List in which every node comes after all of its operands; the root is last
    """
    order = []
    stack = [node]
    while stack:
        current = stack.pop()
        order.append(current)
        stack.extend(children(current))
    order.reverse()
    return order


def fold(node, combine):
    """
    Bottom-up reduction of a tree

    Args:
        node: Root node
        combine: Called as combine(node, operand_results) for every node in post-order

    Returns:
        combine's result for the root
    """
    stack = []
    for current in postorder(node):
        arity = len(children(current))
        operands = stack[len(stack) - arity:]
        del stack[len(stack) - arity:]
        stack.append(combine(current, operands))
    return stack.pop()


def same_tree(first, second):
    """Structural equality of two trees"""
    stack = [(first, second)]
    while stack:
        a, b = stack.pop()
        if a is b:
            continue
        if type(a) is not type(b) or _label(a) != _label(b):
            return False
        stack.extend(zip(children(a), children(b)))
    return True


def tree_hash(node):
    """Hash consistent with same_tree"""
    return fold(node, lambda current, operands: hash((_label(current),) + tuple(operands)))


@dataclass(frozen=True)
class Expression:
    """
    Parsed scalar function

    Attributes:
        root: Root node
        arity: Highest variable index referenced (0 for constants)
        source: Text the expression was parsed from, if any
    """

    root: Node
    arity: int
    source: str = None

    def __eq__(self, other):
        if not isinstance(other, Expression):
            return NotImplemented
        return self.arity == other.arity and same_tree(self.root, other.root)

    def __hash__(self):
        return hash((tree_hash(self.root), self.arity))

    def __str__(self):
        return serialize(self)

    @property
    def variables(self):
        """Sorted tuple of referenced variable indices"""
        return tuple(sorted(_collect_variables(self.root)))


def _collect_variables(node):
    return {current.index for current in postorder(node) if isinstance(current, Variable)}


# Left operands continuing a left-associative chain drop their parentheses
_CHAINS = {'+': ('+', '-'), '-': ('+', '-'), '*': ('*', '/'), '/': ('*', '/')}


def _render(node, parts):
    if isinstance(node, Constant):
        return repr(float(node.value))
    if isinstance(node, Variable):
        return f"x{node.index}"
    if isinstance(node, Unary):
        if node.name == 'neg':
            return f"(-{parts[0]})"
        return f"{node.name}({parts[0]})"
    if isinstance(node, Binary):
        left = parts[0]
        if isinstance(node.left, Binary) and node.left.op in _CHAINS.get(node.op, ()):
            left = left[1:-1]
        return f"({left} {node.op} {parts[1]})"
    raise TypeError(f"Unknown node type: {type(node).__name__}")


def serialize(expression):
    """
    Render an expression as canonical source

    Every operation is parenthesised except the left operand of a chain of
    + - or * /, so a long sum serializes without deep nesting.

    Args:
        expression: Expression or bare node

    Returns:
        Source text that parses back to a structurally equal tree
    """
    node = expression.root if isinstance(expression, Expression) else expression
    return fold(node, _render)


def arity_of(node):
    """
    Highest variable index referenced by a node

    Args:
        node: Root node

    Returns:
        Integer arity (0 if no variables)
    """
    found = _collect_variables(node)
    return max(found) if found else 0
