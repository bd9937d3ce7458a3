"""Concrete syntax: lexer, term/type parser with type inference, printer,
and the structural parser for theory files and Isar proofs.

Every symbol has an ASCII alias (==> for the meta-implication arrow, /\\
for conjunction, ...); the printer always emits the symbol form.  Infix
and binder notation beyond the framework's own is declared in theory
files, so this module stays object-logic agnostic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import LexError, ParseError, TypeInferenceError, UnifyError
from .sorts import fresh_tvar_name, resolve_type
from .term import (
    Abs,
    App,
    Bound,
    Const,
    Free,
    TCon,
    TVar,
    Term,
    Type,
    Var,
    dest_funT,
    mk_funT,
    propT,
    strip_comb,
    term_tvars,
)
from .termops import norm, subst_term_types

# --------------------------------------------------------------------------
# Symbols and lexing

# unicode form -> canonical ascii token
SYMBOL_ALIASES = {
    "⟹": "==>", "⋀": "!!", "≡": "==", "∧": "/\\", "∨": "\\/",
    "⟶": "-->", "⟷": "<->", "¬": "~", "∀": "ALL", "∃": "EX",
    "λ": "%", "≤": "<=", "⇒": "=>", "≠": "~=",
}

# canonical ascii -> unicode form (for printing)
SYMBOL_FORM = {v: k for k, v in SYMBOL_ALIASES.items()}

_MULTI_SYMBOLS = ["==>", "-->", "<->", "~=", "<=", "::", "==", "!!", "=>",
                  "/\\", "\\/", "..", ":"]
_SINGLE_SYMBOLS = list("=<>+*-~%.,()[]{}@#?!")

TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>\(\*.*?\*\))
      | (?P<string>"[^"]*")
      | (?P<cartouche>‹[^›]*›)
      | (?P<schematic>\?[A-Za-z][A-Za-z0-9_']*(\.[0-9]+)?)
      | (?P<tvar>'[A-Za-z][A-Za-z0-9_]*)
      | (?P<num>[0-9]+)
      | (?P<ident>[A-Za-z][A-Za-z0-9_']*)
      | (?P<sym>""" +
    "|".join(re.escape(s) for s in _MULTI_SYMBOLS) + "|" +
    "|".join(re.escape(s) for s in _SINGLE_SYMBOLS) + r")",
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str          # string | schematic | tvar | num | ident | sym | eof
    text: str          # canonical (ascii) text
    pos: int           # source offset
    end: int


def lex(text: str, offset: int = 0) -> list[Token]:
    """Tokenize; unicode symbols are normalized to their ascii aliases."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in SYMBOL_ALIASES:
            alias = SYMBOL_ALIASES[ch]
            kind = "ident" if alias.isalpha() else "sym"
            tokens.append(Token(kind, alias, offset + i, offset + i + 1))
            i += 1
            continue
        m = TOKEN_RE.match(text, i)
        if not m:
            raise LexError(f"cannot tokenize {text[i:i+10]!r}", offset + i)
        i = m.end()
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        tok = m.group()
        if kind == "string":
            tok = tok[1:-1]
        elif kind == "cartouche":
            tok = tok[1:-1]
            kind = "string"
        tokens.append(Token(kind, tok, offset + m.start(), offset + m.end()))
    tokens.append(Token("eof", "", offset + n, offset + n))
    return tokens


# --------------------------------------------------------------------------
# Grammar: infix and binder tables

@dataclass(frozen=True)
class Infix:
    symbol: str
    prec: int
    assoc: str        # "left" | "right"
    const: str        # constant the notation stands for


@dataclass(frozen=True)
class Binder:
    symbol: str
    const: Optional[str]   # None for plain lambda


# the framework's own notation; object-logic notation comes from theory data
_BASE_INFIXES = (
    Infix("==>", 1, "right", "Pure.imp"),
    Infix("==", 2, "right", "Pure.eq"),
)
_BASE_BINDERS = (
    Binder("%", None),
    Binder("!!", "Pure.all"),
)

SYNTAX_DATA_KEY = "syntax.notation"


class Grammar:
    def __init__(self, infixes=(), binders=(), prefixes=()):
        self.infixes = {i.symbol: i for i in _BASE_INFIXES}
        self.binders = {b.symbol: b for b in _BASE_BINDERS}
        self.prefixes = {}          # symbol -> (prec, const)
        for i in infixes:
            self.infixes[i.symbol] = i
        for b in binders:
            self.binders[b.symbol] = b
        for (sym, prec, const) in prefixes:
            self.prefixes[sym] = (prec, const)
        self.const_infix = {i.const: i for i in self.infixes.values()}
        self.const_binder = {b.const: b for b in self.binders.values() if b.const}
        self.const_prefix = {c: (s, p) for s, (p, c) in self.prefixes.items()}


def grammar_of(thy) -> Grammar:
    infixes, binders, prefixes = [], [], []
    for entry in thy.lookup_data(SYNTAX_DATA_KEY, ()):
        if entry[0] in ("infixl", "infixr"):
            _, sym, prec, const = entry
            infixes.append(Infix(sym, prec,
                                 "left" if entry[0] == "infixl" else "right",
                                 const))
        elif entry[0] == "binder":
            binders.append(Binder(entry[1], entry[2]))
        elif entry[0] == "prefix":
            prefixes.append((entry[1], entry[2], entry[3]))
    return Grammar(infixes, binders, prefixes)


def notation_entry(kind: str, symbol: str, prec: int, const: str):
    symbol = SYMBOL_ALIASES.get(symbol, symbol)
    if kind == "binder":
        return ("binder", symbol, const)
    if kind == "prefix":
        return ("prefix", symbol, prec, const)
    return (kind, symbol, prec, const)


# --------------------------------------------------------------------------
# Type parsing

class _Tokens:
    def __init__(self, toks, pos=0):
        self.toks = toks
        self.i = pos

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.pos)
        return self.next()

    def at(self, text: str) -> bool:
        return self.peek().text == text

    def done(self) -> bool:
        return self.peek().kind == "eof"


def parse_type(thy, source) -> Type:
    ts = _Tokens(lex(source)) if isinstance(source, str) else source
    ty = _parse_type(ts)
    if isinstance(source, str) and not ts.done():
        raise ParseError(f"trailing input {ts.peek().text!r}", ts.peek().pos)
    return ty


def _parse_type(ts: _Tokens) -> Type:
    left = _parse_type_postfix(ts)
    if ts.at("=>"):
        ts.next()
        right = _parse_type(ts)
        return mk_funT(left, right)
    return left


def _parse_type_postfix(ts: _Tokens) -> Type:
    args = [_parse_type_atom(ts)]
    while ts.peek().kind == "ident":
        name = ts.next().text
        args = [TCon(name, tuple(args))]
    return args[0]


def _parse_type_atom(ts: _Tokens) -> Type:
    t = ts.peek()
    if t.text == "(":
        ts.next()
        members = [_parse_type(ts)]
        while ts.at(","):
            ts.next()
            members.append(_parse_type(ts))
        ts.expect(")")
        if len(members) > 1:
            name = ts.next()
            if name.kind != "ident":
                raise ParseError("expected a type constructor", name.pos)
            return TCon(name.text, tuple(members))
        return members[0]
    if t.kind == "tvar":
        ts.next()
        sort = frozenset()
        if ts.at("::"):
            ts.next()
            sort = _parse_sort(ts)
        return TVar(t.text, sort)
    if t.kind == "ident":
        ts.next()
        return TCon(t.text, ())
    raise ParseError(f"expected a type, found {t.text!r}", t.pos)


def _parse_sort(ts: _Tokens) -> frozenset:
    if ts.at("{"):
        ts.next()
        classes = []
        if not ts.at("}"):
            classes.append(ts.next().text)
            while ts.at(","):
                ts.next()
                classes.append(ts.next().text)
        ts.expect("}")
        return frozenset(classes)
    t = ts.next()
    if t.kind != "ident":
        raise ParseError("expected a class name", t.pos)
    return frozenset((t.text,))


# --------------------------------------------------------------------------
# Term parsing with order-sorted type inference

class _TermParser:
    def __init__(self, thy, grammar: Grammar, markup=None, fixed_types=None):
        self.thy = thy
        self.g = grammar
        self.unifier = thy.type_unifier()
        self.frees: dict[str, Type] = dict(fixed_types or {})
        self.vars: dict[tuple, Type] = {}
        self.bound: list[tuple[str, Type]] = []
        self.markup = markup

    def fresh(self) -> TVar:
        return TVar(fresh_tvar_name())

    def note(self, tok: Token, kind: str):
        if self.markup is not None:
            self.markup.append((tok.pos, tok.end, kind))

    # -- precedence climbing -------------------------------------------

    def parse(self, ts: _Tokens, min_prec: int = 0) -> tuple[Term, Type]:
        left, lty = self.parse_app(ts)
        while True:
            tok = ts.peek()
            info = self.g.infixes.get(tok.text) if tok.kind == "sym" or tok.kind == "ident" else None
            if info is None or info.prec < min_prec:
                break
            ts.next()
            nxt = info.prec + 1 if info.assoc == "left" else info.prec
            right, rty = self.parse(ts, nxt)
            left, lty = self.apply_const(info.const, [(left, lty), (right, rty)], tok)
        if ts.at("::") and min_prec <= 3:
            ts.next()
            ann = _parse_type(ts)
            self.unify(lty, ann, ts.peek().pos)
            lty = ann
        return left, lty

    def parse_app(self, ts: _Tokens) -> tuple[Term, Type]:
        f, fty = self.parse_atom(ts)
        while True:
            tok = ts.peek()
            if tok.kind in ("ident", "schematic", "num") and tok.text not in self.g.infixes \
                    and tok.text not in self.g.binders and not self._is_structural(tok):
                pass
            elif tok.text in ("(", "["):
                pass
            else:
                break
            a, aty = self.parse_atom(ts)
            res = self.fresh()
            self.unify(fty, mk_funT(aty, res), tok.pos)
            f, fty = App(f, a), res
        return f, fty

    def _is_structural(self, tok: Token) -> bool:
        return False

    def parse_atom(self, ts: _Tokens) -> tuple[Term, Type]:
        tok = ts.peek()
        if tok.text in self.g.binders and (tok.kind == "sym" or tok.kind == "ident"):
            return self.parse_binder(ts)
        if tok.text in self.g.prefixes:
            ts.next()
            prec, const = self.g.prefixes[tok.text]
            arg, aty = self.parse(ts, prec)
            return self.apply_const(const, [(arg, aty)], tok)
        if tok.text == "(":
            ts.next()
            t, ty = self.parse(ts, 0)
            ts.expect(")")
            return t, ty
        if tok.text == "[":
            return self.parse_list(ts)
        if tok.kind == "num":
            ts.next()
            return self.numeral(int(tok.text), tok)
        if tok.kind == "schematic":
            ts.next()
            self.note(tok, "schematic")
            name, _, idx = tok.text[1:].partition(".")
            key = (name, int(idx) if idx else 0)
            ty = self.vars.get(key)
            if ty is None:
                ty = self.vars[key] = self.fresh()
            return Var(key[0], key[1], ty), ty
        if tok.kind == "ident":
            ts.next()
            name = tok.text
            for i in range(len(self.bound) - 1, -1, -1):
                if self.bound[i][0] == name:
                    self.note(tok, "bound")
                    depth = len(self.bound) - 1 - i
                    return Bound(depth), self.bound[i][1]
            declared = self.thy.consts.get(name)
            if declared is not None:
                inst = self.instance_type(declared)
                return Const(name, inst), inst
            self.note(tok, "free")
            ty = self.frees.get(name)
            if ty is None:
                ty = self.frees[name] = self.fresh()
            return Free(name, ty), ty
        raise ParseError(f"unexpected token {tok.text!r}", tok.pos)

    def parse_binder(self, ts: _Tokens) -> tuple[Term, Type]:
        tok = ts.next()
        binder = self.g.binders[tok.text]
        vars_ = []
        while ts.peek().kind == "ident":
            vtok = ts.next()
            self.note(vtok, "bound")
            vty = self.fresh()
            vars_.append((vtok.text, vty))
        if not vars_:
            raise ParseError("binder needs at least one variable", tok.pos)
        if ts.at("::"):
            ts.next()
            ann = _parse_type(ts)
            vars_ = [(n, ann) for (n, _) in vars_]
        ts.expect(".")
        self.bound.extend(vars_)
        body, bty = self.parse(ts, 0)
        for (name, vty) in reversed(vars_):
            self.bound.pop()
            if binder.const is None:
                body, bty = Abs(name, vty, body), mk_funT(vty, bty)
            else:
                declared = self.thy.consts.get(binder.const)
                inst = self.instance_type(declared)
                res = self.fresh()
                self.unify(inst, mk_funT(mk_funT(vty, bty), res), tok.pos)
                body, bty = App(Const(binder.const, inst), Abs(name, vty, body)), res
        return body, bty

    def parse_list(self, ts: _Tokens) -> tuple[Term, Type]:
        tok = ts.expect("[")
        elems = []
        if not ts.at("]"):
            elems.append(self.parse(ts, 0))
            while ts.at(","):
                ts.next()
                elems.append(self.parse(ts, 0))
        ts.expect("]")
        nil = self.thy.consts.get("Nil")
        cons = self.thy.consts.get("Cons")
        if nil is None or cons is None:
            raise ParseError("list syntax needs Nil/Cons in the theory", tok.pos)
        elemT = self.fresh()
        listT = TCon("list", (elemT,))
        t: Term = Const("Nil", listT)
        for (e, ety) in reversed(elems):
            self.unify(ety, elemT, tok.pos)
            consT = self.instance_type(cons)
            self.unify(consT, mk_funT(elemT, mk_funT(listT, listT)), tok.pos)
            t = App(App(Const("Cons", consT), e), t)
        return t, listT

    def list_type(self, elemT: Type) -> Type:
        return TCon("list", (elemT,))

    def numeral(self, n: int, tok: Token) -> tuple[Term, Type]:
        zero = self.thy.consts.get("0")
        suc = self.thy.consts.get("Suc")
        if zero is None or (n > 0 and suc is None):
            raise ParseError("numerals need 0/Suc in the theory", tok.pos)
        t: Term = Const("0", zero)
        for _ in range(n):
            t = App(Const("Suc", suc), t)
        return t, zero

    def apply_const(self, name: str, args, tok: Token) -> tuple[Term, Type]:
        declared = self.thy.consts.get(name)
        if declared is None:
            raise ParseError(f"notation for undeclared constant {name}", tok.pos)
        inst = self.instance_type(declared)
        t: Term = Const(name, inst)
        ty = inst
        for (a, aty) in args:
            res = self.fresh()
            self.unify(ty, mk_funT(aty, res), tok.pos)
            t, ty = App(t, a), res
        return t, ty

    def instance_type(self, declared: Type) -> Type:
        ren = {name: TVar(fresh_tvar_name(), tv.sort)
               for name, tv in _type_tvars(declared).items()}
        return _subst_ty(declared, ren)

    def unify(self, t1: Type, t2: Type, pos: int) -> None:
        try:
            self.unifier.unify(t1, t2)
        except UnifyError as e:
            raise TypeInferenceError(str(e), pos) from e


def _type_tvars(ty: Type, acc=None):
    if acc is None:
        acc = {}
    if isinstance(ty, TVar):
        acc.setdefault(ty.name, ty)
    else:
        for a in ty.args:
            _type_tvars(a, acc)
    return acc


def _subst_ty(ty: Type, ren) -> Type:
    if isinstance(ty, TVar):
        return ren.get(ty.name, ty)
    return TCon(ty.name, tuple(_subst_ty(a, ren) for a in ty.args))


def _canonical_tvars(t: Term) -> Term:
    """Rename leftover inference type variables to 'a, 'b, ... in order."""
    tvs = term_tvars(t)
    names = "abcdefghijklmnopqrstuvwxyz"
    ren = {}
    fresh_i = 0
    for name, tv in tvs.items():
        if fresh_i < len(names):
            newname = f"'{names[fresh_i]}"
        else:
            newname = f"'v{fresh_i}"
        fresh_i += 1
        ren[name] = TVar(newname, tv.sort)
    return subst_term_types(t, ren)


def _resolve_types(t: Term, unifier) -> Term:
    def res(ty):
        return resolve_type(unifier.tsub, ty)

    def go(t):
        cls = type(t)
        if cls is App:
            return App(go(t.fun), go(t.arg))
        if cls is Abs:
            return Abs(t.var_name, res(t.var_type), go(t.body))
        if cls is Const:
            return Const(t.name, res(t.typ))
        if cls is Free:
            return Free(t.name, res(t.typ))
        if cls is Var:
            return Var(t.name, t.index, res(t.typ))
        return t

    return go(t)


def parse_term(thy, text: str, offset: int = 0, markup=None,
               expect: Optional[Type] = None, fixed_types=None,
               canonical=True) -> Term:
    """Parse and type-infer a term.  Unconstrained type variables default
    to the empty sort and are renamed canonically ('a, 'b, ...)."""
    toks = lex(text, offset)
    p = _TermParser(thy, grammar_of(thy), markup, fixed_types)
    ts = _Tokens(toks)
    t, ty = p.parse(ts, 0)
    if not ts.done():
        raise ParseError(f"trailing input {ts.peek().text!r}", ts.peek().pos)
    if expect is not None:
        p.unify(ty, expect, offset)
    t = _resolve_types(t, p.unifier)
    if canonical:
        t = _canonical_tvars(t)
    return norm(t)


def parse_prop(thy, text: str, offset: int = 0, markup=None,
               fixed_types=None, canonical=True) -> Term:
    """Parse a proposition; object-level formulas are wrapped in the
    theory's truth judgment if one is registered."""
    toks = lex(text, offset)
    p = _TermParser(thy, grammar_of(thy), markup, fixed_types)
    ts = _Tokens(toks)
    t, ty = p.parse(ts, 0)
    if not ts.done():
        raise ParseError(f"trailing input {ts.peek().text!r}", ts.peek().pos)
    judgment = thy.lookup_data("syntax.judgment")
    rty = resolve_type(p.unifier.tsub, ty)
    if judgment is not None and rty != propT:
        jconst = thy.consts[judgment]
        objT = dest_funT(jconst)[0]
        p.unify(ty, objT, offset)
        t = App(Const(judgment, jconst), t)
    else:
        p.unify(ty, propT, offset)
    t = _resolve_types(t, p.unifier)
    if canonical:
        t = _canonical_tvars(t)
    return norm(t)


# --------------------------------------------------------------------------
# Printing

def print_type(ty: Type, prec: int = 0) -> str:
    if isinstance(ty, TVar):
        if ty.sort:
            if len(ty.sort) == 1:
                return f"{ty.name}::{next(iter(ty.sort))}"
            return f"{ty.name}::{{{','.join(sorted(ty.sort))}}}"
        return ty.name
    if ty.name == "fun":
        dom, rng = ty.args
        s = f"{print_type(dom, 1)} {SYMBOL_FORM['=>']} {print_type(rng, 0)}"
        return f"({s})" if prec > 0 else s
    if not ty.args:
        return ty.name
    if len(ty.args) == 1:
        return f"{print_type(ty.args[0], 1)} {ty.name}"
    inner = ", ".join(print_type(a, 0) for a in ty.args)
    return f"({inner}) {ty.name}"


def _sym_form(sym: str) -> str:
    return SYMBOL_FORM.get(sym, sym)


class _Printer:
    def __init__(self, grammar: Grammar, thy=None):
        self.g = grammar
        self.thy = thy
        self.judgment = thy.lookup_data("syntax.judgment") if thy else None

    def print(self, t: Term, prec: int = 0, bound=None) -> str:
        bound = bound if bound is not None else []
        head, args = strip_comb(t)
        # hidden truth judgment
        if (self.judgment and isinstance(head, Const)
                and head.name == self.judgment and len(args) == 1):
            return self.print(args[0], prec, bound)
        if isinstance(head, Const):
            info = self.g.const_infix.get(head.name)
            if info is not None and len(args) == 2:
                lp = info.prec + (1 if info.assoc == "right" else 0)
                rp = info.prec + (1 if info.assoc == "left" else 0)
                s = (f"{self.print(args[0], lp, bound)} {_sym_form(info.symbol)} "
                     f"{self.print(args[1], rp, bound)}")
                return f"({s})" if prec > info.prec else s
            pre = self.g.const_prefix.get(head.name)
            if pre is not None and len(args) == 1:
                sym, p = pre
                s = f"{_sym_form(sym)} {self.print(args[0], p + 1, bound)}"
                return f"({s})" if prec > p else s
            b = self.g.const_binder.get(head.name)
            if b is not None and len(args) == 1 and isinstance(args[0], Abs):
                return self.print_binder(b, args[0], prec, bound)
            numeral = self.as_numeral(t)
            if numeral is not None:
                return numeral
            lst = self.as_list(t, bound)
            if lst is not None:
                return lst
        if isinstance(t, App):
            s = f"{self.print(t.fun, 100, bound)} {self.print(t.arg, 101, bound)}"
            return f"({s})" if prec > 100 else s
        if isinstance(t, Abs):
            return self.print_binder(self.g.binders["%"], t, prec, bound)
        if isinstance(t, Const):
            return t.name.rsplit(".", 1)[-1] if t.name.startswith("Pure.") else t.name
        if isinstance(t, Free):
            return t.name
        if isinstance(t, Var):
            return f"?{t.name}.{t.index}" if t.index else f"?{t.name}"
        if isinstance(t, Bound):
            if t.index < len(bound):
                return bound[-1 - t.index]
            return f"B.{t.index}"
        return repr(t)

    def print_binder(self, b: Binder, abs_: Abs, prec: int, bound) -> str:
        name = abs_.var_name or "x"
        while name in bound:
            name += "'"
        bound.append(name)
        body = self.print(abs_.body, 0, bound)
        bound.pop()
        sym = _sym_form(b.symbol)
        sep = "" if not sym[-1].isalnum() else " "
        s = f"{sym}{sep}{name}. {body}"
        return f"({s})" if prec > 0 else s

    def as_numeral(self, t: Term) -> Optional[str]:
        n = 0
        while True:
            if isinstance(t, Const) and t.name == "0":
                return str(n)
            if (isinstance(t, App) and isinstance(t.fun, Const)
                    and t.fun.name == "Suc"):
                n += 1
                t = t.arg
                continue
            return None

    def as_list(self, t: Term, bound) -> Optional[str]:
        elems = []
        while True:
            if isinstance(t, Const) and t.name == "Nil":
                return "[" + ", ".join(elems) + "]"
            head, args = strip_comb(t)
            if isinstance(head, Const) and head.name == "Cons" and len(args) == 2:
                elems.append(self.print(args[0], 0, bound))
                t = args[1]
                continue
            return None


def print_term(t: Term, thy=None, prec: int = 0) -> str:
    g = grammar_of(thy) if thy is not None else Grammar()
    return _Printer(g, thy).print(t, prec)


# --------------------------------------------------------------------------
# Structural parsing: theory files and Isar proofs

TOP_KEYWORDS = frozenset((
    "theory", "typedecl", "consts", "axioms", "definition", "class",
    "instance", "lemma", "theorem", "notepad", "quickcheck", "constructors",
    "judgment", "end",
))

ISAR_KEYWORDS = frozenset((
    "fix", "assume", "have", "show", "from", "with", "note", "then",
    "proof", "qed", "next", "by", "and", "begin", "imports", "fixes",
    "assumes", "where", "is", "add", "only", "size",
))

ATTR_NAMES = frozenset(("simp", "intro", "intro!", "elim", "elim!", "dest",
                        "code", "iff"))


@dataclass
class Node:
    """Base class so every command/step carries its source extent."""
    pos: int = field(default=0)
    end: int = field(default=0)


@dataclass
class TheoryHeader(Node):
    name: str = ""
    imports: tuple = ()


@dataclass
class Typedecl(Node):
    args: tuple = ()
    name: str = ""


@dataclass
class ConstDecl(Node):
    name: str = ""
    typ_src: str = ""
    notation: Optional[tuple] = None   # (kind, symbol, prec)


@dataclass
class ConstsCmd(Node):
    decls: tuple = ()


@dataclass
class JudgmentCmd(Node):
    decl: Optional[ConstDecl] = None


@dataclass
class AxiomDecl(Node):
    name: str = ""
    prop_src: str = ""
    attrs: tuple = ()


@dataclass
class AxiomsCmd(Node):
    decls: tuple = ()


@dataclass
class DefinitionCmd(Node):
    name: str = ""
    attrs: tuple = ()
    eq_src: str = ""


@dataclass
class ClassCmd(Node):
    name: str = ""
    supers: tuple = ()
    fixes: tuple = ()      # ConstDecl
    assumes: tuple = ()    # AxiomDecl


@dataclass
class InstanceCmd(Node):
    tycon: str = ""
    arg_sorts: tuple = ()  # tuple of sorts (each a tuple of class names)
    cls: str = ""
    proof: Optional["ProofNode"] = None


@dataclass
class ConstructorsCmd(Node):
    typename: str = ""
    consts: tuple = ()


@dataclass
class LemmaCmd(Node):
    kind: str = "lemma"
    name: str = ""
    attrs: tuple = ()
    prop_src: str = ""
    prop_pos: int = 0
    proof: Optional["ProofNode"] = None


@dataclass
class NotepadCmd(Node):
    steps: tuple = ()


@dataclass
class QuickcheckCmd(Node):
    size: Optional[int] = None
    prop_src: str = ""
    prop_pos: int = 0


@dataclass
class EndCmd(Node):
    pass


@dataclass
class Method(Node):
    name: str = "-"
    args: tuple = ()        # fact/rule names
    add: tuple = ()
    only: tuple = ()
    nums: tuple = ()


@dataclass
class ProofNode(Node):
    kind: str = "by"        # by | proof | dot | dotdot
    method: Optional[Method] = None
    steps: tuple = ()
    qed_method: Optional[Method] = None


@dataclass
class FixStep(Node):
    names: tuple = ()
    typ_src: Optional[str] = None


@dataclass
class AssumeStep(Node):
    label: Optional[str] = None
    props: tuple = ()       # (src, pos) pairs


@dataclass
class HaveStep(Node):
    kind: str = "have"      # have | show
    label: Optional[str] = None
    prop_src: str = ""
    prop_pos: int = 0
    proof: Optional[ProofNode] = None


@dataclass
class ChainStep(Node):
    kind: str = "from"      # from | with | then
    names: tuple = ()       # names or ("<lit>", src) markers


@dataclass
class NoteStep(Node):
    label: Optional[str] = None
    items: tuple = ()       # names or ("<lit>", src, pos)


@dataclass
class BlockStep(Node):
    kind: str = "{"


@dataclass
class NextStep(Node):
    pass


@dataclass
class TheoryFile(Node):
    header: Optional[TheoryHeader] = None
    commands: tuple = ()
    errors: tuple = ()      # (pos, message)
    spans: tuple = ()       # (start, end) covering the text


class _StructParser:
    def __init__(self, text: str):
        self.text = text
        self.toks = lex(text)
        self.ts = _Tokens(self.toks)
        self.errors = []

    # -- helpers ---------------------------------------------------------

    def peek(self):
        return self.ts.peek()

    def next(self):
        return self.ts.next()

    def at(self, text):
        return self.ts.at(text)

    def expect(self, text):
        return self.ts.expect(text)

    def ident(self, what="name"):
        t = self.peek()
        if t.kind not in ("ident", "num", "tvar"):
            raise ParseError(f"expected {what}, found {t.text!r}", t.pos)
        return self.next().text

    def string(self, what="a quoted string"):
        t = self.peek()
        if t.kind == "string":
            return self.next()
        if t.kind in ("ident", "num") and t.text not in TOP_KEYWORDS \
                and t.text not in ISAR_KEYWORDS:
            return self.next()
        raise ParseError(f"expected {what}, found {t.text!r}", t.pos)

    def attrs(self):
        out = []
        while self.at("["):
            self.next()
            name = self.ident("attribute")
            if self.at("!"):
                self.next()
                name += "!"
            extra = []
            while not self.at("]") and self.peek().kind != "eof":
                extra.append(self.next().text)
            self.expect("]")
            out.append(name)
        return tuple(out)

    def recover(self):
        """Skip to the next top-level keyword (never consuming it)."""
        depth = 0
        while True:
            t = self.peek()
            if t.kind == "eof":
                return
            if t.text == "proof" or (t.text == "notepad"):
                depth += 1
            elif t.text == "qed" and depth > 0:
                depth -= 1
            elif t.kind == "ident" and t.text in TOP_KEYWORDS and depth == 0:
                if t.text == "end":
                    self.next()
                    continue
                return
            self.next()

    # -- commands --------------------------------------------------------

    def parse_file(self) -> TheoryFile:
        header = None
        commands = []
        starts = []
        while self.peek().kind != "eof":
            t = self.peek()
            if t.kind != "ident" or t.text not in TOP_KEYWORDS:
                self.errors.append((t.pos, f"expected a command, found {t.text!r}"))
                self.recover()
                continue
            starts.append(t.pos)
            try:
                cmd = self.command()
                if isinstance(cmd, TheoryHeader):
                    header = cmd
                elif cmd is not None:
                    commands.append(cmd)
            except ParseError as e:
                self.errors.append((e.pos if e.pos is not None else t.pos, e.msg))
                self.recover()
        spans = []
        bounds = starts + [len(self.text)]
        if bounds and bounds[0] != 0:
            spans.append((0, bounds[0]))
        for a, b in zip(bounds, bounds[1:]):
            spans.append((a, b))
        return TheoryFile(0, len(self.text), header, tuple(commands),
                          tuple(self.errors), tuple(spans))

    def command(self):
        t = self.peek()
        kw = t.text
        if kw == "theory":
            return self.p_theory()
        if kw == "typedecl":
            return self.p_typedecl()
        if kw == "consts":
            return self.p_consts()
        if kw == "judgment":
            tok = self.next()
            decl = self.const_decl()
            return JudgmentCmd(tok.pos, self.peek().pos, decl)
        if kw == "axioms":
            return self.p_axioms()
        if kw == "definition":
            return self.p_definition()
        if kw == "class":
            return self.p_class()
        if kw == "instance":
            return self.p_instance()
        if kw == "constructors":
            return self.p_constructors()
        if kw in ("lemma", "theorem"):
            return self.p_lemma()
        if kw == "notepad":
            return self.p_notepad()
        if kw == "quickcheck":
            return self.p_quickcheck()
        if kw == "end":
            tok = self.next()
            return EndCmd(tok.pos, tok.end)
        raise ParseError(f"unknown command {kw!r}", t.pos)

    def p_theory(self):
        tok = self.expect("theory")
        name = self.ident("theory name")
        imports = []
        if self.at("imports"):
            self.next()
            while self.peek().kind in ("ident", "string") \
                    and self.peek().text != "begin":
                imports.append(self.next().text)
        self.expect("begin")
        return TheoryHeader(tok.pos, self.peek().pos, name, tuple(imports))

    def p_typedecl(self):
        tok = self.expect("typedecl")
        args = []
        while self.peek().kind == "tvar":
            args.append(self.next().text)
        if self.at("(") :
            self.next()
            while not self.at(")"):
                if self.peek().kind == "tvar":
                    args.append(self.next().text)
                else:
                    self.next()
            self.expect(")")
        name = self.ident("type name")
        return Typedecl(tok.pos, self.peek().pos, tuple(args), name)

    def const_decl(self) -> ConstDecl:
        t = self.peek()
        name = self.ident("constant name")
        self.expect("::")
        typ = self.string("a type")
        notation = None
        if self.at("("):
            self.next()
            kind = self.ident("notation kind")
            sym_tok = self.string("a symbol")
            prec = 0
            if self.peek().kind == "num":
                prec = int(self.next().text)
            self.expect(")")
            notation = (kind, sym_tok.text, prec)
        return ConstDecl(t.pos, self.peek().pos, name, typ.text, notation)

    def p_consts(self):
        tok = self.expect("consts")
        decls = []
        while True:
            t = self.peek()
            if t.kind == "eof" or (t.text in TOP_KEYWORDS):
                break
            if t.text == "and":
                self.next()
                continue
            decls.append(self.const_decl())
        return ConstsCmd(tok.pos, self.peek().pos, tuple(decls))

    def axiom_decl(self) -> AxiomDecl:
        t = self.peek()
        name = self.ident("axiom name")
        self.expect(":")
        prop = self.string("a proposition")
        attrs = self.attrs()
        return AxiomDecl(prop.pos, prop.end, name, prop.text, attrs)

    def p_axioms(self):
        tok = self.expect("axioms")
        decls = []
        while True:
            t = self.peek()
            if t.kind == "eof" or t.text in TOP_KEYWORDS:
                break
            if t.text == "and":
                self.next()
                continue
            decls.append(self.axiom_decl())
        return AxiomsCmd(tok.pos, self.peek().pos, tuple(decls))

    def p_definition(self):
        tok = self.expect("definition")
        name = None
        attrs = ()
        t = self.peek()
        if t.kind == "ident":
            name = self.next().text
            attrs = self.attrs()
            self.expect(":")
        eq = self.string("a defining equation")
        return DefinitionCmd(tok.pos, self.peek().pos, name, attrs, eq.text)

    def p_class(self):
        tok = self.expect("class")
        name = self.ident("class name")
        supers = []
        if self.at("<"):
            self.next()
            supers.append(self.ident("superclass"))
            while self.at(","):
                self.next()
                supers.append(self.ident("superclass"))
        fixes, assumes = [], []
        while True:
            if self.at("fixes"):
                self.next()
                fixes.append(self.const_decl())
                while self.at("and"):
                    self.next()
                    fixes.append(self.const_decl())
            elif self.at("assumes"):
                self.next()
                assumes.append(self.axiom_decl())
                while self.at("and"):
                    self.next()
                    assumes.append(self.axiom_decl())
            else:
                break
        return ClassCmd(tok.pos, self.peek().pos, name, tuple(supers),
                        tuple(fixes), tuple(assumes))

    def p_instance(self):
        tok = self.expect("instance")
        tycon = self.ident("type constructor")
        self.expect("::")
        arg_sorts = []
        if self.at("("):
            self.next()
            while not self.at(")"):
                if self.at(","):
                    self.next()
                    continue
                if self.at("{"):
                    self.next()
                    cs = []
                    while not self.at("}"):
                        if self.at(","):
                            self.next()
                            continue
                        cs.append(self.ident("class"))
                    self.expect("}")
                    arg_sorts.append(tuple(cs))
                else:
                    arg_sorts.append((self.ident("class"),))
            self.expect(")")
        cls = self.ident("class")
        proof = None
        if self.at("by") or self.at("proof") or self.at(".") or self.at(".."):
            proof = self.p_proof()
        return InstanceCmd(tok.pos, self.peek().pos, tycon, tuple(arg_sorts),
                           cls, proof)

    def p_constructors(self):
        tok = self.expect("constructors")
        typename = self.ident("type name")
        self.expect("=")
        consts = []
        while self.peek().kind in ("ident", "num") and \
                self.peek().text not in TOP_KEYWORDS:
            consts.append(self.next().text)
        return ConstructorsCmd(tok.pos, self.peek().pos, typename, tuple(consts))

    def p_lemma(self):
        tok = self.next()   # lemma | theorem
        kind = tok.text
        name = ""
        attrs = ()
        t = self.peek()
        if t.kind == "ident" and t.text not in TOP_KEYWORDS:
            # might be "name [attrs]:" or an unnamed statement
            save = self.ts.i
            maybe = self.next().text
            maybe_attrs = self.attrs()
            if self.at(":"):
                self.next()
                name, attrs = maybe, maybe_attrs
            else:
                self.ts.i = save
        prop = self.string("a proposition")
        proof = self.p_proof()
        return LemmaCmd(tok.pos, self.peek().pos, kind, name, attrs,
                        prop.text, prop.pos, proof)

    def p_quickcheck(self):
        tok = self.expect("quickcheck")
        size = None
        if self.at("["):
            self.next()
            if self.at("size"):
                self.next()
                self.expect("=")
                size = int(self.next().text)
            self.expect("]")
        prop = self.string("a proposition")
        return QuickcheckCmd(tok.pos, self.peek().pos, size, prop.text, prop.pos)

    def p_notepad(self):
        tok = self.expect("notepad")
        self.expect("begin")
        steps = self.p_steps(until=("end",))
        self.expect("end")
        return NotepadCmd(tok.pos, self.peek().pos, tuple(steps))

    # -- proofs ----------------------------------------------------------

    def p_method(self) -> Method:
        t = self.peek()
        if t.text == "-":
            self.next()
            return Method(t.pos, t.end, "-")
        if t.text == "(":
            self.next()
            name = self.ident("method name")
            args, add, only, nums = [], [], [], []
            mode = "args"
            while not self.at(")"):
                tok = self.peek()
                if tok.text == "add" :
                    self.next()
                    self.expect(":")
                    mode = "add"
                    continue
                if tok.text == "only":
                    self.next()
                    self.expect(":")
                    mode = "only"
                    continue
                if tok.kind == "num":
                    nums.append(int(self.next().text))
                    continue
                if tok.kind in ("ident", "string"):
                    {"args": args, "add": add, "only": only}[mode].append(
                        self.next().text)
                    continue
                raise ParseError(f"bad method syntax at {tok.text!r}", tok.pos)
            self.expect(")")
            return Method(t.pos, self.peek().pos, name, tuple(args),
                          tuple(add), tuple(only), tuple(nums))
        name = self.ident("method name")
        return Method(t.pos, t.end, name)

    def p_proof(self) -> ProofNode:
        t = self.peek()
        if t.text == "by":
            self.next()
            m = self.p_method()
            return ProofNode(t.pos, self.peek().pos, "by", m)
        if t.text == "..":
            self.next()
            return ProofNode(t.pos, t.end, "dotdot")
        if t.text == ".":
            self.next()
            return ProofNode(t.pos, t.end, "dot")
        if t.text == "proof":
            self.next()
            method = None
            nxt = self.peek()
            if nxt.text == "-" or nxt.text == "(" or (
                    nxt.kind == "ident" and nxt.text not in ISAR_KEYWORDS
                    and nxt.text not in TOP_KEYWORDS):
                method = self.p_method()
            steps = self.p_steps(until=("qed",))
            self.expect("qed")
            qed_method = None
            nxt = self.peek()
            if nxt.text == "(" or (nxt.kind == "ident"
                                   and nxt.text not in ISAR_KEYWORDS
                                   and nxt.text not in TOP_KEYWORDS):
                qed_method = self.p_method()
            return ProofNode(t.pos, self.peek().pos, "proof", method,
                             tuple(steps), qed_method)
        raise ParseError(f"expected a proof, found {t.text!r}", t.pos)

    def p_steps(self, until=()) -> list:
        steps = []
        while True:
            t = self.peek()
            if t.kind == "eof" or t.text in until:
                return steps
            if t.text == "fix":
                self.next()
                names = []
                while self.peek().kind == "ident" and \
                        self.peek().text not in ISAR_KEYWORDS:
                    names.append(self.next().text)
                typ = None
                if self.at("::"):
                    self.next()
                    typ = self.string("a type").text
                steps.append(FixStep(t.pos, self.peek().pos, tuple(names), typ))
            elif t.text == "assume":
                self.next()
                label = None
                save = self.ts.i
                nxt = self.peek()
                if nxt.kind == "ident" or nxt.text == "*":
                    cand = self.next().text
                    if self.at(":"):
                        self.next()
                        label = cand
                    else:
                        self.ts.i = save
                elif nxt.text == "*":
                    label = self.next().text
                    self.expect(":")
                props = []
                s = self.string("a proposition")
                props.append((s.text, s.pos))
                while self.at("and"):
                    self.next()
                    s = self.string("a proposition")
                    props.append((s.text, s.pos))
                steps.append(AssumeStep(t.pos, self.peek().pos, label,
                                        tuple(props)))
            elif t.text in ("have", "show"):
                self.next()
                label = None
                save = self.ts.i
                nxt = self.peek()
                if nxt.kind == "ident" and nxt.text not in ISAR_KEYWORDS:
                    cand = self.next().text
                    if self.at(":"):
                        self.next()
                        label = cand
                    else:
                        self.ts.i = save
                s = self.string("a proposition")
                proof = self.p_proof()
                steps.append(HaveStep(t.pos, self.peek().pos, t.text, label,
                                      s.text, s.pos, proof))
            elif t.text in ("from", "with"):
                self.next()
                names = self.fact_refs()
                steps.append(ChainStep(t.pos, self.peek().pos, t.text, names))
            elif t.text == "then":
                self.next()
                steps.append(ChainStep(t.pos, t.end, "then", ()))
            elif t.text == "note":
                self.next()
                label = None
                save = self.ts.i
                nxt = self.peek()
                if nxt.kind == "ident" and nxt.text not in ISAR_KEYWORDS:
                    cand = self.next().text
                    if self.at("="):
                        self.next()
                        label = cand
                    else:
                        self.ts.i = save
                items = self.fact_refs()
                steps.append(NoteStep(t.pos, self.peek().pos, label, items))
            elif t.text == "{":
                self.next()
                steps.append(BlockStep(t.pos, t.end, "{"))
            elif t.text == "}":
                self.next()
                steps.append(BlockStep(t.pos, t.end, "}"))
            elif t.text == "next":
                self.next()
                steps.append(NextStep(t.pos, t.end))
            else:
                raise ParseError(f"unexpected {t.text!r} in proof body", t.pos)

    def fact_refs(self) -> tuple:
        items = []
        while True:
            t = self.peek()
            if t.kind == "string":
                self.next()
                items.append(("<lit>", t.text, t.pos))
            elif t.text == "*":
                self.next()
                items.append("*")
            elif t.kind == "ident" and t.text not in ISAR_KEYWORDS \
                    and t.text not in TOP_KEYWORDS:
                items.append(self.next().text)
            else:
                break
        return tuple(items)


def parse_theory(text: str) -> TheoryFile:
    """Structural parse with recovery: errors accumulate, later commands
    still parse.  Term strings inside commands are parsed at load time."""
    return _StructParser(text).parse_file()


def parse_isar(text: str) -> list:
    """Parse a bare sequence of Isar steps (used by notepad tests)."""
    p = _StructParser(text)
    return p.p_steps()
