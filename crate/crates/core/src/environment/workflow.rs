use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::*;
use crate::foamcase::FilePlanEntry;
use crate::knowledge::KnowledgeBase;
use crate::llm::{AgentRole, Gateway, Image, TokenLedger, TokenTotals};
use crate::paramaster::{post_process, PostExecutor, PostOutcome, DEFAULT_POST_ATTEMPT_CAP};
use crate::perception::{divide_task, observe_picture, setup_framework};
use crate::reviewer::{end_mark, EndMark, ErrorDiagnosis, Review, Reviewer, ReviewerConfig};
use crate::runner::{run_case, Executor, RunLog, RunOutcome, RunnerError};
use crate::writer::{correct_file, first_write, WriteContext, WriterError};

pub const DEFAULT_K_MAX: u32 = 20;

pub struct WorkflowDeps<'a> {
    pub gateway: &'a Gateway,
    pub kb: &'a KnowledgeBase,
    pub executor: &'a dyn Executor,
    pub post: &'a dyn PostExecutor,
}

#[derive(Debug, Clone)]
pub struct WorkflowConfig {
    pub case_id: String,
    pub case_dir: PathBuf,
    pub k_max: u32,
    pub ablation: AblationConfig,
    pub reviewer: ReviewerConfig,
    pub post_attempt_cap: u32,
    pub trace_path: Option<PathBuf>,
}

impl WorkflowConfig {
    pub fn new(case_id: impl Into<String>, case_dir: impl Into<PathBuf>) -> Self {
        Self {
            case_id: case_id.into(),
            case_dir: case_dir.into(),
            k_max: DEFAULT_K_MAX,
            ablation: AblationConfig::default(),
            reviewer: ReviewerConfig::default(),
            post_attempt_cap: DEFAULT_POST_ATTEMPT_CAP,
            trace_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activation {
    pub role: AgentRole,
    pub message_id: u64,
}

#[derive(Debug, Clone)]
pub struct WorkflowResult {
    pub success: bool,
    pub k_used: u32,
    pub phase: Phase,
    pub totals: TokenTotals,
    pub ledger: TokenLedger,
    pub case_dir: PathBuf,
    pub trace_path: Option<PathBuf>,
    pub messages: Vec<Message>,
    pub activations: Vec<Activation>,
    pub diagnoses: Vec<ErrorDiagnosis>,
    pub run_rounds: u32,
    pub post: Option<PostOutcome>,
    /// Reason given by the terminal message.
    pub reason: String,
}

impl WorkflowResult {
    /// Agent roles in activation order.
    pub fn agent_sequence(&self) -> Vec<AgentRole> {
        self.activations.iter().map(|a| a.role).collect()
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }
}

struct Driver<'a> {
    deps: &'a WorkflowDeps<'a>,
    cfg: &'a WorkflowConfig,
    state: WorkflowState,
    bus: Bus,
    reviewer: Reviewer,
    image: Option<Image>,
    ctx: Option<WriteContext>,
    written: Vec<String>,
    diagnoses: Vec<ErrorDiagnosis>,
    run_rounds: u32,
    post: Option<PostOutcome>,
}

type Step = Result<Vec<Payload>, String>;

fn terminal(success: bool, k_used: u32, reason: impl Into<String>, images: Vec<String>) -> Payload {
    Payload::Terminal(TerminalPayload { success, k_used, reason: reason.into(), images })
}

fn read_logs(case_dir: &Path) -> Vec<RunLog> {
    let mut logs: Vec<RunLog> = fs::read_dir(case_dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.file_name().to_string_lossy().starts_with("log.") && e.path().is_file())
        .filter_map(|e| {
            let content = fs::read_to_string(e.path()).ok()?;
            Some(RunLog { name: e.file_name().to_string_lossy().into_owned(), content })
        })
        .collect();
    logs.sort_by(|a, b| a.name.cmp(&b.name));
    logs
}

impl<'a> Driver<'a> {
    fn role_phase(role: AgentRole) -> Phase {
        match role {
            AgentRole::User | AgentRole::Observer | AgentRole::Architect => Phase::Planning,
            AgentRole::InputWriter => Phase::Writing,
            AgentRole::Runner => Phase::Running,
            AgentRole::Reviewer => Phase::Reviewing,
            AgentRole::ParaMaster => Phase::PostProcessing,
        }
    }

    fn ctx(&self) -> Result<&WriteContext, String> {
        self.ctx.as_ref().ok_or_else(|| "no case plan before file instruction".to_string())
    }

    fn observer(&mut self, p: UserRequirementPayload) -> Step {
        let d = self.deps;
        let enabled = self.state.ablation.observe_picture_enabled;
        let report =
            observe_picture(&p.requirement, self.image.as_ref(), enabled, d.gateway, d.kb).map_err(|e| e.to_string())?;
        let split = divide_task(&p.requirement, d.gateway).map_err(|e| e.to_string())?;
        let forwarded_image = p.image_digest.filter(|_| !enabled);
        Ok(vec![Payload::TaskSplit(TaskSplitPayload { requirement: p.requirement, split, report, forwarded_image })])
    }

    fn architect(&mut self, p: TaskSplitPayload) -> Step {
        let d = self.deps;
        let plan = setup_framework(&p.split, &p.report, d.gateway, d.kb).map_err(|e| e.to_string())?;
        let paths: Vec<String> = plan.entries.iter().map(FilePlanEntry::rel_path).collect();
        let total = paths.len();
        let out = paths
            .iter()
            .enumerate()
            .map(|(index, file)| {
                let image_digest = p.forwarded_image.clone().filter(|_| file == crate::writer::BLOCKMESH_DICT);
                Payload::FileInstruction(FileInstructionPayload {
                    file: file.clone(),
                    index,
                    total,
                    info: plan.info.clone(),
                    plan: paths.clone(),
                    image_digest,
                })
            })
            .collect();
        self.ctx = Some(WriteContext {
            requirement: p.requirement,
            task: p.split,
            report: p.report,
            info: plan.info,
            plan: plan.entries,
            image: None,
        });
        Ok(out)
    }

    fn write_outcome(&mut self, file: &str, r: Result<crate::writer::WriteReport, WriterError>) -> Result<(), String> {
        match r {
            Ok(_) => {
                self.written.push(file.to_string());
                Ok(())
            }
            Err(WriterError::EmptyAfterClean(path)) => {
                log::warn!("{path} left unwritten: empty reply");
                Ok(())
            }
            Err(e) => Err(e.to_string()),
        }
    }

    fn file_instruction(&mut self, p: FileInstructionPayload) -> Step {
        let d = self.deps;
        let entry: FilePlanEntry = p.file.parse().map_err(|e| format!("{e}"))?;
        let mut ctx = self.ctx()?.clone();
        if p.image_digest.is_some() {
            ctx.image = self.image.clone();
        }
        let r = first_write(&entry, &ctx, &self.cfg.case_dir, d.gateway, d.kb);
        self.write_outcome(&p.file, r)?;
        if p.index + 1 < p.total {
            return Ok(vec![]);
        }
        let changed_files = std::mem::take(&mut self.written);
        Ok(vec![Payload::RunRequest(RunRequestPayload { round: self.state.k, changed_files })])
    }

    fn diagnosis(&mut self, p: DiagnosisPayload) -> Step {
        let d = self.deps;
        let round = self.state.begin_round().map_err(|e| e.to_string())?;
        match p.diagnosis.entry() {
            Some(entry) => {
                let ctx = self.ctx()?.clone();
                let r = correct_file(&p.diagnosis, &ctx, &self.cfg.case_dir, d.gateway, d.kb);
                self.write_outcome(&entry.rel_path(), r)?;
            }
            None => log::warn!("diagnosis names no file; rerunning unchanged"),
        }
        let changed_files = std::mem::take(&mut self.written);
        Ok(vec![Payload::RunRequest(RunRequestPayload { round, changed_files })])
    }

    fn runner(&mut self, p: RunRequestPayload) -> Step {
        let outcome = match run_case(&self.cfg.case_dir, self.deps.executor) {
            Ok(o) => o,
            Err(RunnerError::MissingExecutionScript(_)) => RunOutcome::missing_script(),
            Err(e) => return Err(e.to_string()),
        };
        self.run_rounds += 1;
        Ok(vec![Payload::RunOutcomeMsg(RunOutcomePayload {
            round: p.round,
            success: outcome.success,
            command_sequence: outcome.command_sequence,
            errors: outcome.errors,
        })])
    }

    fn success_path(&self, outcome: &RunOutcome) -> Step {
        let task = &self.ctx()?.task;
        Ok(vec![match end_mark(outcome, task).map_err(|e| e.to_string())? {
            EndMark::PostProcess(post_task) => Payload::PostProcessRequest(PostProcessRequestPayload { post_task }),
            EndMark::Terminal => terminal(true, self.state.k, "simulation completed", vec![]),
        }])
    }

    fn review(&mut self, p: RunOutcomePayload) -> Step {
        let outcome = RunOutcome {
            success: p.success,
            command_sequence: p.command_sequence,
            logs: read_logs(&self.cfg.case_dir),
            errors: p.errors,
        };
        if outcome.success {
            return self.success_path(&outcome);
        }
        let k = self.state.k;
        if !self.state.ablation.reviewer_enabled {
            return Ok(vec![terminal(false, k, "run failed; review disabled", vec![])]);
        }
        if self.state.cap_reached() {
            return Ok(vec![terminal(false, k, format!("iteration cap {} reached", self.state.k_max), vec![])]);
        }
        match self.reviewer.handle_error(&outcome, &self.cfg.case_dir, self.deps.gateway) {
            Ok(Review::NoError) => self.success_path(&RunOutcome { success: true, ..outcome }),
            Ok(Review::Diagnosis(diagnosis)) => {
                self.diagnoses.push(diagnosis.clone());
                Ok(vec![Payload::Diagnosis(DiagnosisPayload { round: k, diagnosis })])
            }
            Err(e) => Err(e.to_string()),
        }
    }

    fn paramaster(&mut self, p: PostProcessRequestPayload) -> Step {
        let d = self.deps;
        let out = post_process(&p.post_task, &self.cfg.case_dir, d.gateway, d.post, self.cfg.post_attempt_cap)
            .map_err(|e| e.to_string())?;
        let reason = if out.success {
            "post-processing completed".to_string()
        } else {
            format!("post-processing stopped after {} scripts without an image", out.history.len())
        };
        let images = out.images();
        self.post = Some(out);
        Ok(vec![terminal(true, self.state.k, reason, images)])
    }

    fn activate(&mut self, role: AgentRole, msg: &Message) -> Result<Step, EnvError> {
        let payload = msg.decode()?;
        Ok(match (role, payload) {
            (AgentRole::Observer, Payload::UserRequirement(p)) => self.observer(p),
            (AgentRole::Architect, Payload::TaskSplit(p)) => self.architect(p),
            (AgentRole::InputWriter, Payload::FileInstruction(p)) => self.file_instruction(p),
            (AgentRole::InputWriter, Payload::Diagnosis(p)) => self.diagnosis(p),
            (AgentRole::Runner, Payload::RunRequest(p)) => self.runner(p),
            (AgentRole::Reviewer, Payload::RunOutcomeMsg(p)) => self.review(p),
            (AgentRole::ParaMaster, Payload::PostProcessRequest(p)) => self.paramaster(p),
            (role, p) => return Err(EnvError::SchemaMismatch { kind: p.kind(), detail: format!("not routed to {role}") }),
        })
    }
}

/// Runs one case from requirement to a terminal message.
pub fn run_workflow(
    requirement: &str,
    image: Option<Image>,
    deps: &WorkflowDeps<'_>,
    cfg: &WorkflowConfig,
) -> Result<WorkflowResult, EnvError> {
    if requirement.trim().is_empty() {
        return Err(EnvError::Config("requirement is empty".into()));
    }
    if cfg.k_max == 0 {
        return Err(EnvError::Config("k_max must be at least 1".into()));
    }
    fs::create_dir_all(&cfg.case_dir).map_err(EnvError::io(&cfg.case_dir))?;
    let bus = match &cfg.trace_path {
        Some(p) => Bus::with_trace(cfg.case_id.clone(), p)?,
        None => Bus::new(cfg.case_id.clone()),
    };
    let reviewer = Reviewer::new(&cfg.reviewer).map_err(|e| EnvError::Config(e.to_string()))?;
    let mut drv = Driver {
        deps,
        cfg,
        state: WorkflowState::new(cfg.case_id.clone(), cfg.case_dir.clone(), cfg.k_max, cfg.ablation),
        bus,
        reviewer,
        image,
        ctx: None,
        written: Vec::new(),
        diagnoses: Vec::new(),
        run_rounds: 0,
        post: None,
    };
    let image_digest = drv.image.as_ref().map(Image::digest);
    drv.bus.publish(
        AgentRole::User,
        &Payload::UserRequirement(UserRequirementPayload { requirement: requirement.to_string(), image_digest }),
    )?;

    let mut activations = Vec::new();
    let terminal_msg = loop {
        match drv.bus.dispatch_step()? {
            Dispatch::Halt(msg) => break msg,
            Dispatch::Activate { role, message } => {
                drv.state.advance(Driver::role_phase(role))?;
                activations.push(Activation { role, message_id: message.id });
                let outputs = match drv.activate(role, &message)? {
                    Ok(outputs) => outputs,
                    Err(reason) => {
                        log::error!("{role} failed: {reason}");
                        vec![terminal(false, drv.state.k, format!("{role} failed: {reason}"), vec![])]
                    }
                };
                for p in &outputs {
                    drv.bus.publish(role, p)?;
                }
            }
        }
    };
    let Payload::Terminal(t) = terminal_msg.decode()? else {
        unreachable!("halt only on terminal messages")
    };
    drv.state.advance(if t.success { Phase::Done } else { Phase::Failed })?;
    let ledger = deps.gateway.ledger();
    Ok(WorkflowResult {
        success: t.success,
        k_used: drv.state.k,
        phase: drv.state.phase,
        totals: ledger.totals(),
        ledger,
        case_dir: cfg.case_dir.clone(),
        trace_path: drv.bus.trace_path().map(Path::to_path_buf),
        messages: drv.bus.messages().to_vec(),
        activations,
        diagnoses: drv.diagnoses,
        run_rounds: drv.run_rounds,
        post: drv.post,
        reason: t.reason,
    })
}
