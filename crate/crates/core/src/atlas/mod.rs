//! Gluing neighbourhood germs of a zero section into a global atlas.

mod audit;
mod glue;
mod input;
mod shrink;

pub use audit::{
    audit_cover, audit_separation, audit_transitivity, AuditLine, AuditReport, SeparationAudit, TransitivityAudit,
};
pub use glue::{
    build_glued_atlas, check_closed_relation, glue, glue_chartwise_maps, AtlasCertificates, ChartMap, ClosedRelation,
    GlueOutcome, GluedAtlas, GluedChart, GluedMap, GluedMapChart, GluedTransition, Nerve, ZeroSectionChart,
};
pub use input::{
    validate_germ_data, Chart, ChartDoc, GermAtlas, GermAtlasInput, Transition, TransitionDoc, ValidationReport,
};
pub use shrink::{
    compute_overlaps, enforce_triple_domains, failed_certificates, shrink_tubes, tube_radius, AtlasParams, Certificate,
    OverlapTube, ShrunkChart, ShrunkCover, ShrunkPair, TripleCertificate,
};
