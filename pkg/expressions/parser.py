"""
Expression Parser
Recursive descent parser for the expression grammar

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := number | variable | func "(" expr ")" | "(" expr ")"
"""

import re
import math
import logging
from dataclasses import dataclass

from core.errors import ParseError
from expressions.nodes import (
    FUNCTIONS, Constant, Variable, Unary, Binary, Expression, arity_of
)

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r'''
    (?P<space>\s+)
  | (?P<number>(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
''', re.VERBOSE)

_VARIABLE_RE = re.compile(r'x([0-9]+)\Z')

# Token kinds used in "expected" sets
OPERAND_START = frozenset({'number', 'variable', 'function', '(', '-'})
AFTER_OPERAND = frozenset({'+', '-', '*', '/', '^', ')', 'end'})


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int


def _byte_offset(source, index):
    return len(source[:index].encode('utf-8'))


def tokenize(source):
    """
    Split source into tokens

    Args:
        source: Expression text

    Returns:
        List of Token, terminated by an 'end' token

    Raises:
        ParseError: On a character outside the grammar
    """
    tokens = []
    position = 0
    while position < len(source):
        match = _TOKEN_RE.match(source, position)
        if not match:
            raise ParseError(
                f"unexpected character {source[position]!r}",
                _byte_offset(source, position),
                OPERAND_START,
            )
        kind = match.lastgroup
        text = match.group()
        offset = _byte_offset(source, position)
        if kind == 'op':
            tokens.append(Token(text, text, offset))
        elif kind == 'name':
            variable = _VARIABLE_RE.match(text)
            if variable:
                tokens.append(Token('variable', text, offset))
            elif text in FUNCTIONS:
                tokens.append(Token('function', text, offset))
            else:
                raise ParseError(
                    f"unknown name {text!r}",
                    offset,
                    set(FUNCTIONS) | {'variable'},
                )
        elif kind == 'number':
            tokens.append(Token('number', text, offset))
        position = match.end()
    tokens.append(Token('end', '', _byte_offset(source, len(source))))
    return tokens


class _Parser:
    """Single-use parser over a token list"""

    def __init__(self, tokens):
        self.tokens = tokens
        self.position = 0

    @property
    def current(self):
        return self.tokens[self.position]

    def advance(self):
        token = self.current
        self.position += 1
        return token

    def expect(self, kind, expected):
        token = self.current
        if token.kind != kind:
            raise ParseError(f"unexpected {_describe(token)}", token.offset, expected)
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while self.current.kind in ('+', '-'):
            op = self.advance().kind
            node = Binary(op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_factor()
        while self.current.kind in ('*', '/'):
            op = self.advance().kind
            node = Binary(op, node, self.parse_factor())
        return node

    def parse_factor(self):
        if self.current.kind == '-':
            self.advance()
            return Unary('neg', self.parse_factor())
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.current.kind == '^':
            self.advance()
            # right-associative: the exponent is a full factor
            return Binary('^', base, self.parse_factor())
        return base

    def parse_atom(self):
        token = self.current
        if token.kind == 'number':
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ParseError(f"literal {token.text!r} is not finite", token.offset)
            return Constant(value)
        if token.kind == 'variable':
            self.advance()
            index = int(_VARIABLE_RE.match(token.text).group(1))
            if index < 1:
                raise ParseError(
                    f"variable index must be >= 1, got {token.text!r}",
                    token.offset,
                    {'variable'},
                )
            return Variable(index)
        if token.kind == 'function':
            self.advance()
            self.expect('(', {'('})
            argument = self.parse_expr()
            self.expect(')', {')'} | {'+', '-', '*', '/', '^'})
            return Unary(token.text, argument)
        if token.kind == '(':
            self.advance()
            inner = self.parse_expr()
            self.expect(')', {')'} | {'+', '-', '*', '/', '^'})
            return inner
        raise ParseError(f"unexpected {_describe(token)}", token.offset, OPERAND_START)


def _describe(token):
    if token.kind == 'end':
        return 'end of input'
    return f"{token.text!r}"


def parse(source):
    """
    Parse expression source into an Expression

    Args:
        source: Text in the expression grammar

    Returns:
        Expression whose arity is the highest variable index seen

    Raises:
        ParseError: Malformed syntax, unknown function name, variable index 0,
            or nesting too deep for the parser
    """
    if not isinstance(source, str):
        raise ParseError(f"source must be text, got {type(source).__name__}", 0)

    parser = _Parser(tokenize(source))
    try:
        root = parser.parse_expr()
    except RecursionError:
        raise ParseError('expression nested too deeply', parser.current.offset) from None
    if parser.current.kind != 'end':
        token = parser.current
        raise ParseError(f"unexpected {_describe(token)}", token.offset, AFTER_OPERAND)

    expression = Expression(root=root, arity=arity_of(root), source=source)
    logger.debug(f"Parsed {source!r} with arity {expression.arity}")
    return expression
