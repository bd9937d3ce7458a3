"""Recoverable error hierarchy.

Every failure the engine can backtrack over is an exception derived from
ProverError; nothing here should ever abort the process.
"""


class ProverError(Exception):
    """Base class for all recoverable prover errors."""


# --- kernel ---------------------------------------------------------------

class KernelError(ProverError):
    pass


class UndeclaredConstant(KernelError):
    pass


class TypeMismatch(KernelError):
    pass


class SortViolation(KernelError):
    pass


class NotAProposition(KernelError):
    pass


class ShapeMismatch(KernelError):
    pass


class StampIncompatible(KernelError):
    pass


class StampNotIncluded(KernelError):
    pass


class VariableFreeInHypotheses(KernelError):
    pass


class HypothesisVariable(KernelError):
    pass


class DuplicateName(KernelError):
    pass


class CyclicImport(KernelError):
    pass


class IllTyped(KernelError):
    pass


class CircularDefinition(KernelError):
    pass


class OverlappingInstance(KernelError):
    pass


class ExtraTypeVariable(KernelError):
    pass


# --- sorts / classes ------------------------------------------------------

class SortError(ProverError):
    pass


class DuplicateClass(SortError):
    pass


class UnknownClass(SortError):
    pass


class MultipleTypeVariables(SortError):
    pass


class CoregularityViolation(SortError):
    pass


class MissingWitness(SortError):
    pass


class WitnessMismatch(SortError):
    pass


# --- unification ----------------------------------------------------------

class UnifyError(ProverError):
    pass


class Clash(UnifyError):
    pass


class OccursCheck(UnifyError):
    pass


class NoSortInstance(UnifyError):
    pass


class SortFailure(UnifyError):
    pass


class NoMatch(UnifyError):
    pass


# --- simplifier -----------------------------------------------------------

class SimpError(ProverError):
    pass


class NotAnEquation(SimpError):
    pass


class NonPatternLHS(SimpError):
    pass


class ExtraVariablesRHS(SimpError):
    pass


# --- classical reasoner ---------------------------------------------------

class NoRigidHead(ProverError):
    pass


# --- evaluator / quickcheck -----------------------------------------------

class EvalError(ProverError):
    pass


class NotExecutable(EvalError):
    def __init__(self, constant, reason):
        super().__init__(f"{constant}: {reason}")
        self.constant = constant
        self.reason = reason


class NonLinearPattern(EvalError):
    pass


class UnboundRHSVariable(EvalError):
    pass


class StepBudgetExceeded(EvalError):
    pass


class StuckTerm(EvalError):
    pass


# --- Isar -----------------------------------------------------------------

class IsarError(ProverError):
    pass


class UnbalancedBlock(IsarError):
    pass


class PendingObligation(IsarError):
    pass


class ShowMismatch(IsarError):
    pass


class MethodFailed(IsarError):
    pass


class UnfinishedProof(IsarError):
    pass


class UnknownMethod(IsarError):
    pass


# --- syntax ---------------------------------------------------------------

class SyntaxError_(ProverError):
    """Base for lex/parse/type-inference errors; carries a source offset."""

    def __init__(self, msg, pos=None):
        super().__init__(msg if pos is None else f"{msg} (at offset {pos})")
        self.msg = msg
        self.pos = pos


class LexError(SyntaxError_):
    pass


class ParseError(SyntaxError_):
    pass


class TypeInferenceError(SyntaxError_):
    pass


# --- document server ------------------------------------------------------

class DocumentError(ProverError):
    pass


class UnknownVersion(DocumentError):
    pass


class MalformedEdit(DocumentError):
    pass


class Cancelled(ProverError):
    """Raised inside a checking task whose document version was superseded."""
