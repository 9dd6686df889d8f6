use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{EnvError, Message, MessageKind, Payload};
use crate::llm::AgentRole;

#[derive(Debug, Clone, PartialEq)]
pub enum Dispatch {
    Activate { role: AgentRole, message: Message },
    /// A `Terminal` message was reached.
    Halt(Message),
}

/// Append-only message store with strict FIFO delivery.
pub struct Bus {
    case_id: String,
    messages: Vec<Message>,
    delivered: usize,
    trace: Option<(PathBuf, BufWriter<File>)>,
}

impl Bus {
    pub fn new(case_id: impl Into<String>) -> Self {
        Self { case_id: case_id.into(), messages: Vec::new(), delivered: 0, trace: None }
    }

    /// Also writes every message as one JSON line to `path`.
    pub fn with_trace(case_id: impl Into<String>, path: &Path) -> Result<Self, EnvError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(EnvError::io(parent))?;
        }
        let file = File::create(path).map_err(EnvError::io(path))?;
        let mut bus = Self::new(case_id);
        bus.trace = Some((path.to_path_buf(), BufWriter::new(file)));
        Ok(bus)
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn trace_path(&self) -> Option<&Path> {
        self.trace.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn next_id(&self) -> u64 {
        self.messages.last().map_or(1, |m| m.id + 1)
    }

    pub fn publish(&mut self, sender: AgentRole, payload: &Payload) -> Result<u64, EnvError> {
        let msg = Message::new(self.next_id(), sender, self.case_id.clone(), payload);
        self.publish_message(msg)
    }

    /// Validates id sequence and payload schema, then appends.
    pub fn publish_message(&mut self, msg: Message) -> Result<u64, EnvError> {
        let expected = self.next_id();
        if msg.id != expected {
            return Err(EnvError::DuplicateId { expected, got: msg.id });
        }
        msg.decode()?;
        if let Some((path, w)) = &mut self.trace {
            writeln!(w, "{}", msg.to_line()).and_then(|_| w.flush()).map_err(EnvError::io(path))?;
        }
        let id = msg.id;
        self.messages.push(msg);
        Ok(id)
    }

    /// The role that the next undelivered message would activate.
    pub fn eligible(&self) -> Option<AgentRole> {
        self.messages.get(self.delivered).and_then(|m| m.kind.subscriber())
    }

    pub fn dispatch_step(&mut self) -> Result<Dispatch, EnvError> {
        let msg = self.messages.get(self.delivered).cloned().ok_or(EnvError::Deadlock)?;
        self.delivered += 1;
        Ok(match msg.kind.subscriber() {
            Some(role) => Dispatch::Activate { role, message: msg },
            None if msg.kind == MessageKind::Terminal => Dispatch::Halt(msg),
            None => return Err(EnvError::Deadlock),
        })
    }
}

/// Reads and validates a trace file.
pub fn read_trace(path: &Path) -> Result<Vec<Message>, EnvError> {
    let text = fs::read_to_string(path).map_err(EnvError::io(path))?;
    let mut out: Vec<Message> = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let msg: Message = serde_json::from_str(line)
            .map_err(|e| EnvError::Trace(format!("{}:{}: {e}", path.display(), n + 1)))?;
        let expected = out.last().map_or(1, |m| m.id + 1);
        if msg.id != expected {
            return Err(EnvError::DuplicateId { expected, got: msg.id });
        }
        msg.decode()?;
        out.push(msg);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{PostProcessRequestPayload, TerminalPayload, UserRequirementPayload};
    use crate::reviewer::ErrorDiagnosis;

    fn req() -> Payload {
        Payload::UserRequirement(UserRequirementPayload { requirement: "cavity".into(), image_digest: None })
    }

    #[test]
    fn requirement_goes_to_observer() {
        let mut bus = Bus::new("c1");
        assert!(matches!(bus.dispatch_step(), Err(EnvError::Deadlock)));
        bus.publish(AgentRole::User, &req()).unwrap();
        assert_eq!(bus.eligible(), Some(AgentRole::Observer));
        match bus.dispatch_step().unwrap() {
            Dispatch::Activate { role, message } => assert_eq!((role, message.id), (AgentRole::Observer, 1)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(bus.dispatch_step(), Err(EnvError::Deadlock)));
    }

    #[test]
    fn terminal_halts() {
        let mut bus = Bus::new("c1");
        let t = TerminalPayload { success: true, k_used: 0, reason: String::new(), images: vec![] };
        bus.publish(AgentRole::Reviewer, &Payload::Terminal(t)).unwrap();
        assert_eq!(bus.eligible(), None);
        assert!(matches!(bus.dispatch_step().unwrap(), Dispatch::Halt(_)));
    }

    #[test]
    fn schema_and_sequence_checked() {
        let mut bus = Bus::new("c1");
        let outcome = serde_json::json!({"round": 0, "success": false, "command_sequence": [], "errors": []});
        let bad = Message { id: 1, kind: MessageKind::Diagnosis, sender: AgentRole::Reviewer, case_id: "c1".into(), payload: outcome };
        assert!(matches!(bus.publish_message(bad), Err(EnvError::SchemaMismatch { .. })));
        let good = Message::new(
            1,
            AgentRole::Reviewer,
            "c1",
            &Payload::Diagnosis(crate::environment::DiagnosisPayload { round: 0, diagnosis: ErrorDiagnosis::unknown("x") }),
        );
        bus.publish_message(good.clone()).unwrap();
        assert!(matches!(bus.publish_message(good), Err(EnvError::DuplicateId { expected: 2, got: 1 })));
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t/trace.jsonl");
        let mut bus = Bus::with_trace("c1", &path).unwrap();
        bus.publish(AgentRole::User, &req()).unwrap();
        bus.publish(AgentRole::Reviewer, &Payload::PostProcessRequest(PostProcessRequestPayload { post_task: "plot U".into() }))
            .unwrap();
        assert_eq!(read_trace(&path).unwrap(), bus.messages());
    }
}
