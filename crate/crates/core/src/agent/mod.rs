//! Semantic parser that maps instructions to expressions, learning from
//! demonstrations it has verified itself.

mod bm25;
mod chat;
mod learner;
mod mock;
mod prompt;
mod store;

pub use bm25::{bm25_tokens, Bm25Index};
pub use chat::{split_candidates, ChatModel, RemoteChatModel};
pub use learner::{
    propose, Agent, AgentConfig, CandidateOutcome, EvalReport, Mode, StepReport, VerdictRecord,
};
pub use mock::{corrupt, instruction_literals, Corruption, FixedMock, HeuristicMock, OracleMock};
pub use prompt::{build_prompt, ChatMessage, ChatPrompt, MAX_PROMPT_EXAMPLES, SYSTEM_PROMPT};
pub use store::{ExampleStore, InContextExample, Retention};
