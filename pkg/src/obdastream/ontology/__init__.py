"""DL-Lite_A ontologies with aggregate concepts: data model and reasoning."""

from .queries import (
    AggregateAtom,
    AttributeAtom,
    ConceptAtom,
    ConjunctiveQuery,
    QueryParseError,
    RoleAtom,
    UnionOfCQs,
    Var,
    canonicalize,
    parse_aggregate_concept,
    parse_cq,
    parse_ucq,
)
from .reasoning import (
    DEFAULT_CHASE_DEPTH,
    Instance,
    Null,
    OntologyValidationError,
    OracleResult,
    SatisfiabilityReport,
    UnsatisfiableError,
    Violation,
    attribute_closure,
    certain_answers_oracle,
    chase,
    check_satisfiability,
    dataset_instance,
    deductive_closure,
    eval_aggregate_concept,
    evaluate_cq,
    require_valid,
    sub_attributes,
    super_roles,
    validate_ontology,
)
from .syntax import (
    AGGREGATES,
    COMPARATORS,
    AggregateConcept,
    AggregateInclusion,
    AtomicConcept,
    AttributeDisjoint,
    AttributeInclusion,
    ConceptDisjoint,
    ConceptInclusion,
    Dataset,
    ExistsAttribute,
    ExistsRole,
    FunctAttribute,
    FunctRole,
    Ontology,
    OntologyParseError,
    Role,
    RoleDisjoint,
    RoleInclusion,
    format_dataset,
    format_ontology,
    format_rational,
    load_dataset,
    load_ontology,
    parse_dataset,
    parse_ontology,
    to_rational,
)
