"""C-RASP programs: abstract syntax, concrete syntax, printer and validator.

A program is a straight-line list of named operations of two sorts. Boolean
operations hold a truth value per position, Count operations an integer. The
text form is

    program MAJORITY over {0, 1} {
      C1(i) := count[j<=i] Q_1(j);
      C0(i) := count[j<=i] Q_0(j);
      M(i) := C0(i) <= C1(i);
      empty accepts;
    }

`Q_<sym>(i)` is the initial predicate of a symbol and may be used wherever a
Boolean reference may. Comparisons against integer literals, `>=`, `=`, `<`,
`>`, multi-offset local masks and the strict mask `j<i` are sugar; `desugar`
rewrites them into the core constructs the compiler understands.
"""

import dataclasses
import enum
import functools
import json
import logging
import re
from typing import Optional, Union

import lark

logger = logging.getLogger(__name__)

SOS = "$"

KEYWORDS = frozenset(
    {
        "program", "over", "accept", "predict", "empty", "accepts", "not",
        "and", "true", "pos", "mod", "count", "if", "then", "else", "in",
        "i", "j",
    }
)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_DIGITS = re.compile(r"[0-9]+")
_BARE_INITIAL = re.compile(r"[A-Za-z0-9_]+")

GRAMMAR = r"""
start: "program" NAME "over" "{" symbol ("," symbol)* "}" "{" _statement* "}"

_statement: definition | accept_decl | predict_decl | empty_decl
definition: NAME "(" "i" ")" ":=" body ";"
accept_decl: "accept" NAME ";"
predict_decl: "predict" prediction ("," prediction)* ";"
prediction: symbol "->" NAME
empty_decl: "empty" "accepts" ";"

symbol: NAME | INT | ESCAPED_STRING

?body: INITIAL "(" "i" ")"                          -> initial
     | "not" ref                                    -> not_
     | ref "and" ref                                -> and_
     | "true"                                       -> true_
     | "pos" "mod" "(" INT "," INT ")" "(" "i" ")"  -> positional
     | operand "<=" operand                         -> le
     | operand ">=" operand                         -> ge
     | operand "=" operand                          -> eq
     | operand "<" operand                          -> lt
     | operand ">" operand                          -> gt
     | "count" "[" mask "]" pred                    -> count
     | "if" ref "then" ref "else" ref               -> conditional
     | ref "+" ref                                  -> add
     | ref "-" ref                                  -> sub
     | INT                                          -> literal

ref: NAME "(" "i" ")" | INITIAL "(" "i" ")"
pred: NAME "(" "j" ")" | INITIAL "(" "j" ")"
operand: ref | INT

mask: "j" "<=" "i"                                    -> top_mask
    | "j" "<" "i"                                     -> strict_mask
    | "j" "<=" "i" "," "j" "==" rel                   -> single_mask
    | "j" "<=" "i" "," "j" "in" "{" rel ("," rel)* "}" -> set_mask

rel: "i"            -> rel_zero
   | "i" "-" INT    -> rel_minus
   | "i" "+" INT    -> rel_plus

INITIAL.2: /Q_(?:[A-Za-z0-9_]+|"(?:\\.|[^"\\])*")/
NAME: /[A-Za-z_][A-Za-z0-9_]*/
COMMENT: /#[^\n]*/

%import common.INT
%import common.ESCAPED_STRING
%import common.WS
%ignore WS
%ignore COMMENT
"""


# -------------------- Errors --------------------
class DslError(ValueError):
    """Base class for every error raised while reading or checking programs."""


class CraspSyntaxError(DslError):
    def __init__(self, line: int, col: int, expected=()):
        self.line = line
        self.col = col
        self.expected = tuple(sorted(expected))
        hint = ", ".join(self.expected) if self.expected else "end of input"
        super().__init__(f"line {line}, column {col}: syntax error, expected {hint}")


class SortError(DslError):
    def __init__(self, op: str, expected: "Sort", found: "Sort", line=None):
        self.op = op
        self.expected = expected
        self.found = found
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(
            f"{op}{where}: expected a {expected.value} operand, found {found.value}"
        )


class UnknownReference(DslError):
    def __init__(self, op: str, ref: str, line=None):
        self.op = op
        self.ref = ref
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(f"{op}{where}: unknown reference {ref!r}")


class DuplicateName(DslError):
    def __init__(self, name: str, line=None):
        self.name = name
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(f"duplicate name {name!r}{where}")


class ReservedSymbol(DslError):
    def __init__(self, symbol: str = SOS):
        self.symbol = symbol
        super().__init__(f"symbol {symbol!r} is reserved for start-of-sequence")


class InvalidDeclaration(DslError):
    pass


# -------------------- Abstract syntax --------------------
class Sort(enum.Enum):
    BOOLEAN = "Boolean"
    COUNT = "Count"


@dataclasses.dataclass(frozen=True)
class Token:
    """Reference to the initial predicate Q_symbol."""

    symbol: str


Ref = Union[str, Token]
Operand = Union[str, int]


@dataclasses.dataclass(frozen=True)
class PeriodicRelation:
    modulus: int
    residue: int

    def __post_init__(self):
        if self.modulus < 1 or not 0 <= self.residue < self.modulus:
            raise InvalidDeclaration(
                f"pos mod({self.modulus},{self.residue}) needs m >= 1 and 0 <= r < m"
            )

    def holds(self, t: int) -> bool:
        return t % self.modulus == self.residue


@dataclasses.dataclass(frozen=True)
class LocalRelation:
    """Counts positions j with j - i in `offsets`."""

    offsets: tuple

    def __post_init__(self):
        if not self.offsets:
            raise InvalidDeclaration("local mask needs at least one offset")
        canonical = tuple(sorted({int(c) for c in self.offsets}, reverse=True))
        object.__setattr__(self, "offsets", canonical)

    @property
    def radius(self) -> int:
        reach = [-c for c in self.offsets if c <= 0]
        return max(reach, default=0)


@dataclasses.dataclass(frozen=True)
class Top:
    pass


@dataclasses.dataclass(frozen=True)
class Strict:
    pass


Mask = Union[Top, Strict, LocalRelation]


@dataclasses.dataclass(frozen=True)
class Initial:
    symbol: str


@dataclasses.dataclass(frozen=True)
class Not:
    arg: Ref


@dataclasses.dataclass(frozen=True)
class And:
    left: Ref
    right: Ref


@dataclasses.dataclass(frozen=True)
class TrueConst:
    pass


@dataclasses.dataclass(frozen=True)
class Positional:
    relation: PeriodicRelation


@dataclasses.dataclass(frozen=True)
class Leq:
    left: str
    right: str


@dataclasses.dataclass(frozen=True)
class Compare:
    """Comparison sugar: `op` is one of <=, >=, =, <, >."""

    op: str
    left: Operand
    right: Operand


@dataclasses.dataclass(frozen=True)
class Count:
    mask: Mask
    pred: Ref


@dataclasses.dataclass(frozen=True)
class Conditional:
    cond: Ref
    then: str
    orelse: str


@dataclasses.dataclass(frozen=True)
class Add:
    left: str
    right: str


@dataclasses.dataclass(frozen=True)
class Sub:
    left: str
    right: str


@dataclasses.dataclass(frozen=True)
class OneConst:
    pass


BOOLEAN_BODIES = (Initial, Not, And, TrueConst, Positional, Leq, Compare)
COUNT_BODIES = (Count, Conditional, Add, Sub, OneConst)
COMPARISONS = ("<=", ">=", "=", "<", ">")


@dataclasses.dataclass(frozen=True)
class Operation:
    name: str
    body: object
    line: Optional[int] = dataclasses.field(default=None, compare=False, repr=False)

    @property
    def sort(self) -> Sort:
        return Sort.BOOLEAN if isinstance(self.body, BOOLEAN_BODIES) else Sort.COUNT

    @property
    def is_sugar(self) -> bool:
        body = self.body
        if isinstance(body, Compare):
            return True
        if isinstance(body, Count):
            return isinstance(body.mask, Strict) or (
                isinstance(body.mask, LocalRelation) and len(body.mask.offsets) > 1
            )
        return False


@dataclasses.dataclass(frozen=True)
class Program:
    name: str
    alphabet: tuple
    ops: tuple
    accept: str
    predict: tuple = ()
    empty_accepts: bool = False

    @functools.cached_property
    def by_name(self) -> dict:
        return {op.name: op for op in self.ops}

    @property
    def predict_map(self) -> dict:
        return dict(self.predict)

    @property
    def predict_symbols(self) -> tuple:
        """Declared predict symbols in alphabet order."""
        declared = self.predict_map
        return tuple(s for s in self.alphabet if s in declared)

    @property
    def uses_positional(self) -> bool:
        """True when the program needs periodic or local positional features."""
        for op in self.ops:
            if isinstance(op.body, Positional):
                return True
            if isinstance(op.body, Count) and isinstance(op.body.mask, LocalRelation):
                return True
        return False

    @property
    def is_core(self) -> bool:
        return not any(op.is_sugar for op in self.ops)


def default_accept(ops) -> Optional[str]:
    names = [op.name for op in ops if op.sort is Sort.BOOLEAN]
    return names[-1] if names else None


# -------------------- Validation --------------------
def make_program(
    name: str,
    alphabet,
    ops,
    accept: Optional[str] = None,
    predict=(),
    empty_accepts: bool = False,
) -> Program:
    """Build a Program, resolving the default accept target, and validate it."""
    ops = tuple(ops)
    if accept is None:
        accept = default_accept(ops)
        if accept is None:
            raise InvalidDeclaration(f"program {name} has no Boolean operation")
    program = Program(
        name=name,
        alphabet=tuple(alphabet),
        ops=ops,
        accept=accept,
        predict=tuple((str(s), str(n)) for s, n in predict),
        empty_accepts=bool(empty_accepts),
    )
    validate(program)
    return program


def _check_identifier(name: str, line=None):
    if not _IDENT.fullmatch(name) or name in KEYWORDS or name.startswith("Q_"):
        where = f" (line {line})" if line else ""
        raise InvalidDeclaration(f"{name!r}{where} is not a usable operation name")


def validate(program: Program) -> None:
    """Raise a DslError if `program` breaks any structural or sort rule."""
    _check_identifier(program.name)
    if not program.alphabet:
        raise InvalidDeclaration(f"program {program.name} has an empty alphabet")
    seen_symbols = set()
    for symbol in program.alphabet:
        if not isinstance(symbol, str) or not symbol:
            raise InvalidDeclaration("alphabet symbols must be non-empty strings")
        if symbol == SOS:
            raise ReservedSymbol(symbol)
        if symbol in seen_symbols:
            raise DuplicateName(symbol)
        seen_symbols.add(symbol)

    sorts = {}
    for op in program.ops:
        _check_identifier(op.name, op.line)
        if op.name in sorts:
            raise DuplicateName(op.name, op.line)
        _check_body(op, sorts, seen_symbols)
        sorts[op.name] = op.sort

    if not any(s is Sort.BOOLEAN for s in sorts.values()):
        raise InvalidDeclaration(f"program {program.name} has no Boolean operation")
    if program.accept not in sorts:
        raise UnknownReference("accept", program.accept)
    if sorts[program.accept] is not Sort.BOOLEAN:
        raise SortError("accept", Sort.BOOLEAN, sorts[program.accept])

    predicted = set()
    for symbol, target in program.predict:
        if symbol not in seen_symbols:
            raise UnknownReference("predict", symbol)
        if symbol in predicted:
            raise DuplicateName(symbol)
        predicted.add(symbol)
        if target not in sorts:
            raise UnknownReference("predict", target)
        if sorts[target] is not Sort.BOOLEAN:
            raise SortError("predict", Sort.BOOLEAN, sorts[target])


def _check_body(op: Operation, sorts: dict, symbols: set) -> None:
    body = op.body

    def need(ref, expected: Sort):
        if isinstance(ref, Token):
            if ref.symbol not in symbols:
                raise UnknownReference(op.name, f"Q_{ref.symbol}", op.line)
            found = Sort.BOOLEAN
        elif isinstance(ref, str):
            if ref not in sorts:
                raise UnknownReference(op.name, ref, op.line)
            found = sorts[ref]
        else:
            raise InvalidDeclaration(f"{op.name}: malformed reference {ref!r}")
        if found is not expected:
            raise SortError(op.name, expected, found, op.line)

    if isinstance(body, Initial):
        if body.symbol not in symbols:
            raise UnknownReference(op.name, f"Q_{body.symbol}", op.line)
    elif isinstance(body, Not):
        need(body.arg, Sort.BOOLEAN)
    elif isinstance(body, And):
        need(body.left, Sort.BOOLEAN)
        need(body.right, Sort.BOOLEAN)
    elif isinstance(body, (TrueConst, OneConst, Positional)):
        pass
    elif isinstance(body, (Leq, Add, Sub)):
        need(body.left, Sort.COUNT)
        need(body.right, Sort.COUNT)
    elif isinstance(body, Compare):
        if body.op not in COMPARISONS:
            raise InvalidDeclaration(f"{op.name}: unknown comparison {body.op!r}")
        literals = [x for x in (body.left, body.right) if isinstance(x, int)]
        if body.op == "<=" and not literals:
            raise InvalidDeclaration(f"{op.name}: plain <= between counts is Leq")
        for side in (body.left, body.right):
            if isinstance(side, bool) or (isinstance(side, int) and side < 0):
                raise InvalidDeclaration(f"{op.name}: literals must be >= 0")
            if not isinstance(side, int):
                need(side, Sort.COUNT)
    elif isinstance(body, Count):
        if not isinstance(body.mask, (Top, Strict, LocalRelation)):
            raise InvalidDeclaration(f"{op.name}: unknown mask {body.mask!r}")
        need(body.pred, Sort.BOOLEAN)
    elif isinstance(body, Conditional):
        need(body.cond, Sort.BOOLEAN)
        need(body.then, Sort.COUNT)
        need(body.orelse, Sort.COUNT)
    else:
        raise InvalidDeclaration(f"{op.name}: unknown construct {body!r}")


# -------------------- Parsing --------------------
@dataclasses.dataclass
class _Declaration:
    kind: str
    value: object
    line: Optional[int]


def _initial_symbol(text: str) -> str:
    rest = text[2:]
    return json.loads(rest) if rest.startswith('"') else rest


@lark.v_args(inline=True)
class _Transformer(lark.Transformer):
    def start(self, name, *items):
        symbols = [x for x in items if isinstance(x, str)]
        statements = [x for x in items if not isinstance(x, str)]
        return str(name), symbols, statements

    def symbol(self, tok):
        return json.loads(tok) if tok.type == "ESCAPED_STRING" else str(tok)

    def definition(self, name, body):
        return Operation(str(name), body, line=name.line)

    def accept_decl(self, name):
        return _Declaration("accept", str(name), name.line)

    def predict_decl(self, *pairs):
        return _Declaration("predict", list(pairs), None)

    def prediction(self, symbol, name):
        return symbol, str(name)

    def empty_decl(self):
        return _Declaration("empty", True, None)

    def ref(self, tok):
        return Token(_initial_symbol(tok)) if tok.type == "INITIAL" else str(tok)

    def pred(self, tok):
        return Token(_initial_symbol(tok)) if tok.type == "INITIAL" else str(tok)

    def operand(self, x):
        return int(x) if isinstance(x, lark.Token) and x.type == "INT" else x

    def initial(self, tok):
        return Initial(_initial_symbol(tok))

    def not_(self, arg):
        return Not(arg)

    def and_(self, left, right):
        return And(left, right)

    def true_(self):
        return TrueConst()

    def positional(self, m, r):
        return Positional(PeriodicRelation(int(m), int(r)))

    def le(self, left, right):
        if isinstance(left, int) or isinstance(right, int):
            return Compare("<=", left, right)
        return Leq(left, right)

    def ge(self, left, right):
        return Compare(">=", left, right)

    def eq(self, left, right):
        return Compare("=", left, right)

    def lt(self, left, right):
        return Compare("<", left, right)

    def gt(self, left, right):
        return Compare(">", left, right)

    def count(self, mask, pred):
        return Count(mask, pred)

    def conditional(self, cond, then, orelse):
        return Conditional(cond, then, orelse)

    def add(self, left, right):
        return Add(left, right)

    def sub(self, left, right):
        return Sub(left, right)

    def literal(self, tok):
        if str(tok) != "1":
            raise CraspSyntaxError(tok.line, tok.column, ["1"])
        return OneConst()

    def top_mask(self):
        return Top()

    def strict_mask(self):
        return Strict()

    def single_mask(self, rel):
        return LocalRelation((rel,))

    def set_mask(self, *rels):
        return LocalRelation(tuple(rels))

    def rel_zero(self):
        return 0

    def rel_minus(self, c):
        return -int(c)

    def rel_plus(self, c):
        return int(c)


@functools.cache
def _parser() -> lark.Lark:
    """Create/retrieve a singleton Lark parser from the grammar."""
    return lark.Lark(GRAMMAR, parser="lalr", propagate_positions=True)


def parse(source: str) -> Program:
    """Parse and validate program text."""
    try:
        tree = _parser().parse(source)
        name, symbols, statements = _Transformer().transform(tree)
    except lark.exceptions.VisitError as e:
        raise e.orig_exc from None
    except lark.exceptions.UnexpectedInput as e:
        expected = getattr(e, "expected", None) or getattr(e, "allowed", None) or ()
        raise CraspSyntaxError(
            getattr(e, "line", 0), getattr(e, "column", 0), expected
        ) from None

    ops, accept, predict, empty = [], None, None, False
    for item in statements:
        if isinstance(item, Operation):
            ops.append(item)
        elif item.kind == "accept":
            if accept is not None:
                raise InvalidDeclaration(f"line {item.line}: second accept declaration")
            accept = item.value
        elif item.kind == "predict":
            if predict is not None:
                raise InvalidDeclaration("a program declares one predict family")
            predict = item.value
        else:
            empty = True
    program = make_program(name, symbols, ops, accept, predict or (), empty)
    logger.debug(f"parsed program {program.name} with {len(program.ops)} ops")
    return program


# -------------------- Printing --------------------
def _symbol_text(symbol: str) -> str:
    bare = (_IDENT.fullmatch(symbol) and symbol not in KEYWORDS) or _DIGITS.fullmatch(
        symbol
    )
    if bare and not symbol.startswith("Q_"):
        return symbol
    return json.dumps(symbol, ensure_ascii=False)


def _initial_text(symbol: str) -> str:
    if _BARE_INITIAL.fullmatch(symbol):
        return f"Q_{symbol}"
    return "Q_" + json.dumps(symbol, ensure_ascii=False)


def _ref_text(ref: Ref, var: str = "i") -> str:
    if isinstance(ref, Token):
        return f"{_initial_text(ref.symbol)}({var})"
    return f"{ref}({var})"


def _operand_text(x: Operand) -> str:
    return str(x) if isinstance(x, int) else _ref_text(x)


def _rel_text(c: int) -> str:
    if c == 0:
        return "i"
    return f"i-{-c}" if c < 0 else f"i+{c}"


def _mask_text(mask: Mask) -> str:
    if isinstance(mask, Top):
        return "j<=i"
    if isinstance(mask, Strict):
        return "j<i"
    if len(mask.offsets) == 1:
        return f"j<=i, j=={_rel_text(mask.offsets[0])}"
    return "j<=i, j in {" + ", ".join(_rel_text(c) for c in mask.offsets) + "}"


def body_text(body) -> str:
    if isinstance(body, Initial):
        return f"{_initial_text(body.symbol)}(i)"
    if isinstance(body, Not):
        return f"not {_ref_text(body.arg)}"
    if isinstance(body, And):
        return f"{_ref_text(body.left)} and {_ref_text(body.right)}"
    if isinstance(body, TrueConst):
        return "true"
    if isinstance(body, Positional):
        rel = body.relation
        return f"pos mod({rel.modulus},{rel.residue})(i)"
    if isinstance(body, Leq):
        return f"{_ref_text(body.left)} <= {_ref_text(body.right)}"
    if isinstance(body, Compare):
        return f"{_operand_text(body.left)} {body.op} {_operand_text(body.right)}"
    if isinstance(body, Count):
        return f"count[{_mask_text(body.mask)}] {_ref_text(body.pred, 'j')}"
    if isinstance(body, Conditional):
        return (
            f"if {_ref_text(body.cond)} then {_ref_text(body.then)} "
            f"else {_ref_text(body.orelse)}"
        )
    if isinstance(body, Add):
        return f"{_ref_text(body.left)} + {_ref_text(body.right)}"
    if isinstance(body, Sub):
        return f"{_ref_text(body.left)} - {_ref_text(body.right)}"
    if isinstance(body, OneConst):
        return "1"
    raise InvalidDeclaration(f"cannot print {body!r}")


def print_program(program: Program) -> str:
    """Canonical text; parse(print_program(p)) == p."""
    symbols = ", ".join(_symbol_text(s) for s in program.alphabet)
    lines = [f"program {program.name} over {{{symbols}}} {{"]
    for op in program.ops:
        lines.append(f"  {op.name}(i) := {body_text(op.body)};")
    if program.accept != default_accept(program.ops):
        lines.append(f"  accept {program.accept};")
    if program.predict:
        pairs = ", ".join(f"{_symbol_text(s)} -> {n}" for s, n in program.predict)
        lines.append(f"  predict {pairs};")
    if program.empty_accepts:
        lines.append("  empty accepts;")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -------------------- Desugaring --------------------
class _Lowering:
    def __init__(self, taken: set):
        self.taken = taken
        self.out = []

    def fresh(self, base: str) -> str:
        k = 1
        while f"{base}__{k}" in self.taken:
            k += 1
        name = f"{base}__{k}"
        self.taken.add(name)
        return name

    def emit(self, name: str, body, line) -> str:
        self.out.append(Operation(name, body, line))
        return name

    def literal(self, k: int, base: str, line) -> str:
        one = self.emit(self.fresh(base), OneConst(), line)
        if k == 0:
            return self.emit(self.fresh(base), Sub(one, one), line)
        acc = one
        for _ in range(k - 1):
            acc = self.emit(self.fresh(base), Add(acc, one), line)
        return acc

    def operand(self, x: Operand, base: str, line) -> str:
        return self.literal(x, base, line) if isinstance(x, int) else x

    def less(self, name: str, left: str, right: str, line):
        one = self.emit(self.fresh(name), OneConst(), line)
        succ = self.emit(self.fresh(name), Add(left, one), line)
        self.emit(name, Leq(succ, right), line)

    def lower(self, op: Operation):
        name, body, line = op.name, op.body, op.line
        if isinstance(body, Compare):
            left = self.operand(body.left, name, line)
            right = self.operand(body.right, name, line)
            if body.op == "<=":
                self.emit(name, Leq(left, right), line)
            elif body.op == ">=":
                self.emit(name, Leq(right, left), line)
            elif body.op == "=":
                le = self.emit(self.fresh(name), Leq(left, right), line)
                ge = self.emit(self.fresh(name), Leq(right, left), line)
                self.emit(name, And(le, ge), line)
            elif body.op == "<":
                self.less(name, left, right, line)
            else:
                self.less(name, right, left, line)
        elif isinstance(body, Count) and isinstance(body.mask, Strict):
            upto = self.emit(self.fresh(name), Count(Top(), body.pred), line)
            one = self.emit(self.fresh(name), OneConst(), line)
            zero = self.emit(self.fresh(name), Sub(one, one), line)
            own = self.emit(self.fresh(name), Conditional(body.pred, one, zero), line)
            self.emit(name, Sub(upto, own), line)
        elif op.is_sugar:
            parts = [
                self.emit(self.fresh(name), Count(LocalRelation((c,)), body.pred), line)
                for c in body.mask.offsets
            ]
            acc = parts[0]
            for part in parts[1:-1]:
                acc = self.emit(self.fresh(name), Add(acc, part), line)
            self.emit(name, Add(acc, parts[-1]), line)
        else:
            self.out.append(op)


def desugar(program: Program) -> Program:
    """Rewrite comparison, literal and mask sugar into core constructs.

    Every original operation keeps its name and meaning; helper operations
    are named `<op>__<k>` and placed immediately before their user.
    """
    if program.is_core:
        return program
    lowering = _Lowering({op.name for op in program.ops})
    for op in program.ops:
        lowering.lower(op)
    return make_program(
        program.name,
        program.alphabet,
        lowering.out,
        accept=program.accept,
        predict=program.predict,
        empty_accepts=program.empty_accepts,
    )
