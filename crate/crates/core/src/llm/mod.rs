//! Language-model interface: prompts, backends, response parsing and
//! constraint compilation.

pub mod backend;
pub mod constraints;
pub mod parse;
pub mod prompt;

pub use backend::{BackendConfig, BackendKind, ChatBackend, HttpBackend, LlmError, MockBackend, MockScript};
pub use constraints::{
    compile_constraints, extend_table, parse_verb_reply, resolve_unknown_verb, verb_prompt, ConstraintTarget, DirectionPair,
    InteractionConstraintSpec, VerbRule, VerbTable,
};
pub use parse::{
    last_json_block, parse_activity_chunk, parse_activity_response, parse_graph_response, parse_tuple,
    reasoning_traces, ActivityChunk, ParseError,
};
pub use prompt::{
    build_activity_prompt, build_graph_prompt, FewShot, FixedDescription, GenerationDirectives, PromptBundle,
    UserPart,
};
