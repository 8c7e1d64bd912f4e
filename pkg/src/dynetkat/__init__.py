"""DyNetKAT: NetKAT with synchronisation, guarded recursion and multi-packet
semantics, with tools for equivalence, safety and reachability checking."""

from .packets import CompletePoint, FieldSchema, Packet, SchemaError
from .netkat import (
    Assign,
    Canonical,
    NkRelation,
    Not,
    One,
    Plus,
    Policy,
    Seq,
    Star,
    Test,
    Zero,
    eval_policy,
    eval_pred,
    nk_equiv,
    nk_is_zero,
    normalize,
)
from .terms import (
    Bot,
    CommMerge,
    Definitions,
    Delta,
    LeftMerge,
    OPlus,
    Par,
    Proj,
    Rcfg,
    Recv,
    RestrictionSet,
    Send,
    SeqN,
    Term,
    Var,
    check_guarded,
    expand_sum,
    instantiate_indexed_vars,
)
from .semantics import Config, Flow, RcfgL, RecvL, SendL, build_lts, config_step, term_step
from .normalizer import aci_equal, head_normal_form, trace_expand, unfold
from .equivalence import bisimilar, bounded_equiv, semantic_layering_check, trace_included
from .safety import Alphabet, SafetyProp, check_safe, desugar, prop_to_dnk
from .analysis import check_reach, check_waypoint, fixtures, head, load_fixture, tail
from .syntax import Model, format_program, load_model, parse_program

__version__ = "0.1.0"
