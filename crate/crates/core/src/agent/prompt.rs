use serde::{Deserialize, Serialize};

use super::store::InContextExample;

pub const MAX_PROMPT_EXAMPLES: usize = 10;

/// Fixed instructions sent as the system message.
pub const SYSTEM_PROMPT: &str = "We are going to map sentences to Boolean expressions. \
The Boolean expression variable Symbols are numbered 0 to 8, e.g. Symbol_0, Symbol_1... \
The operators are and : &, or : |, not : ~. \
I will now give a new sentence and you will come up with an expression. \
Now wait for a new sentence command. \
Respond with a list of 10 candidate Boolean expressions. \
Respond only with the list of Boolean expressions. Never say anything else.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: &str) -> Self {
        Self {
            role: role.to_string(),
            content: content.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatPrompt {
    pub system: String,
    /// (instruction, expression) demonstration turns.
    pub examples: Vec<(String, String)>,
    pub command: String,
}

impl ChatPrompt {
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut m = vec![ChatMessage::new("system", &self.system)];
        for (u, a) in &self.examples {
            m.push(ChatMessage::new("user", u));
            m.push(ChatMessage::new("assistant", a));
        }
        m.push(ChatMessage::new("user", &self.command));
        m
    }
}

pub fn build_prompt(instruction: &str, examples: &[&InContextExample]) -> ChatPrompt {
    assert!(
        examples.len() <= MAX_PROMPT_EXAMPLES,
        "at most {MAX_PROMPT_EXAMPLES} examples fit in a prompt"
    );
    ChatPrompt {
        system: SYSTEM_PROMPT.to_string(),
        examples: examples
            .iter()
            .map(|e| (e.instruction.clone(), e.expression.clone()))
            .collect(),
        command: instruction.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolexpr::parse;

    #[test]
    fn empty_prompt_has_system_and_command() {
        let p = build_prompt("pick up a box", &[]);
        let m = p.to_messages();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].role, "system");
        assert!(m[0].content.starts_with("We are going to map sentences"));
        assert_eq!(m[1], ChatMessage::new("user", "pick up a box"));
    }

    #[test]
    fn examples_render_as_turn_pairs_in_order() {
        let exs: Vec<InContextExample> = (0..10)
            .map(|i| {
                InContextExample::new(
                    &format!("instruction {i}"),
                    &parse(&format!("Symbol_{} & Symbol_7", i % 9)).unwrap(),
                )
            })
            .collect();
        let refs: Vec<&InContextExample> = exs.iter().collect();
        let p = build_prompt("pick up a red object that is not a ball", &refs);
        let m = p.to_messages();
        assert_eq!(m.len(), 22);
        assert_eq!(m[1], ChatMessage::new("user", "instruction 0"));
        assert_eq!(m[2], ChatMessage::new("assistant", "Symbol_0 & Symbol_7"));
        assert_eq!(m[19].content, "instruction 9");
        assert_eq!(m[21].role, "user");
    }

    #[test]
    #[should_panic]
    fn more_than_ten_examples_is_rejected() {
        let e = InContextExample::new("x", &parse("Symbol_0").unwrap());
        let refs = vec![&e; 11];
        build_prompt("y", &refs);
    }
}
