"""STARQL frontend: parsing, printing, validation and compilation."""

from .ast import (
    IRI,
    Construct,
    GraphPattern,
    IndexTerm,
    PulseDecl,
    Quantified,
    SelectOutput,
    Sequencing,
    StarqlQuery,
    StaticSource,
    StreamSource,
    StringLiteral,
    Triple,
)
from .parser import StarqlSyntaxError, parse, parse_file, tokenize
from .printer import format_duration, format_query
from .validate import RULES, StarqlValidationError, Violation, validate
