//! Six-constraint action policy. Every constraint is evaluated so the
//! decision carries the full list of failures.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::kv::{self, KvError, Record};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum ActionType {
    SendEmail,
    WritePublicEndpoint,
    FileWrite,
    NetworkConnect,
    Other(String),
}

impl FromStr for ActionType {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "SendEmail" => ActionType::SendEmail,
            "WritePublicEndpoint" => ActionType::WritePublicEndpoint,
            "FileWrite" => ActionType::FileWrite,
            "NetworkConnect" => ActionType::NetworkConnect,
            other => ActionType::Other(other.to_string()),
        })
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionType::SendEmail => f.write_str("SendEmail"),
            ActionType::WritePublicEndpoint => f.write_str("WritePublicEndpoint"),
            ActionType::FileWrite => f.write_str("FileWrite"),
            ActionType::NetworkConnect => f.write_str("NetworkConnect"),
            ActionType::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TargetClass {
    ExternalNetwork,
    InternalNetwork,
    Local,
}

impl FromStr for TargetClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ExternalNetwork" => Ok(TargetClass::ExternalNetwork),
            "InternalNetwork" => Ok(TargetClass::InternalNetwork),
            "Local" => Ok(TargetClass::Local),
            _ => Err(format!("unknown target class `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SessionState {
    Supervised,
    Unsupervised,
}

impl FromStr for SessionState {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Supervised" => Ok(SessionState::Supervised),
            "Unsupervised" => Ok(SessionState::Unsupervised),
            _ => Err(format!("unknown session state `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRecord {
    pub action_type: ActionType,
    pub target_class: TargetClass,
    pub scope: BTreeSet<String>,
    /// Opaque digest; compared as a string.
    pub content_hash: String,
    pub session_state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolicyConfig {
    pub authorized_scope: BTreeSet<String>,
    pub approved_manifest: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ConstraintId {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 6] = [
        ConstraintId::C1,
        ConstraintId::C2,
        ConstraintId::C3,
        ConstraintId::C4,
        ConstraintId::C5,
        ConstraintId::C6,
    ];

    pub fn description(self) -> &'static str {
        match self {
            ConstraintId::C1 => "target is not an external network",
            ConstraintId::C2 => "action does not send email",
            ConstraintId::C3 => "action does not write a public endpoint",
            ConstraintId::C4 => "scope is within the authorized scope",
            ConstraintId::C5 => "content hash is in the approved manifest",
            ConstraintId::C6 => "session is supervised",
        }
    }

    fn holds(self, a: &ActionRecord, p: &PolicyConfig) -> bool {
        match self {
            ConstraintId::C1 => a.target_class != TargetClass::ExternalNetwork,
            ConstraintId::C2 => a.action_type != ActionType::SendEmail,
            ConstraintId::C3 => a.action_type != ActionType::WritePublicEndpoint,
            ConstraintId::C4 => a.scope.is_subset(&p.authorized_scope),
            ConstraintId::C5 => p.approved_manifest.contains(&a.content_hash),
            ConstraintId::C6 => a.session_state == SessionState::Supervised,
        }
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyVerdict {
    Safe,
    Unsafe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub verdict: PolicyVerdict,
    pub failed: Vec<ConstraintId>,
}

pub fn evaluate(a: &ActionRecord, p: &PolicyConfig) -> Decision {
    let failed: Vec<ConstraintId> = ConstraintId::ALL
        .into_iter()
        .filter(|c| !c.holds(a, p))
        .collect();
    let verdict = if failed.is_empty() {
        PolicyVerdict::Safe
    } else {
        PolicyVerdict::Unsafe
    };
    Decision { verdict, failed }
}

impl ActionRecord {
    pub fn from_record(r: &Record) -> Result<Self, KvError> {
        let action_type = r.require("type")?.parse().unwrap_or_else(|e| match e {});
        let target_class = r.require("target")?.parse().map_err(|e: String| r.bad("target", e))?;
        let session_state = r.require("session")?.parse().map_err(|e: String| r.bad("session", e))?;
        Ok(ActionRecord {
            action_type,
            target_class,
            scope: r.list("scope").into_iter().collect(),
            content_hash: r.require("hash")?.to_string(),
            session_state,
        })
    }
}

/// Actions file: one record per line with `type`, `target`, `scope`,
/// `hash` and `session`; an optional `id` names the action in the log.
pub fn parse_actions(text: &str) -> Result<Vec<(String, ActionRecord)>, KvError> {
    kv::parse(text)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r.get("id").map_or_else(|| format!("action-{}", i + 1), String::from);
            Ok((id, ActionRecord::from_record(r)?))
        })
        .collect()
}

/// Policy file: `authorized_scope=` and `approved_manifest=` lists; keys
/// may repeat across lines and accumulate.
pub fn parse_policy(text: &str) -> Result<PolicyConfig, KvError> {
    let mut p = PolicyConfig::default();
    for r in kv::parse(text)? {
        p.authorized_scope.extend(r.list("authorized_scope"));
        p.approved_manifest.extend(r.list("approved_manifest"));
    }
    Ok(p)
}

/// One decision-log line.
pub fn log_line(timestamp: &str, id: &str, d: &Decision) -> String {
    let failed = d.failed.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    let verdict = match d.verdict {
        PolicyVerdict::Safe => "safe",
        PolicyVerdict::Unsafe => "unsafe",
    };
    kv::render([
        ("timestamp", timestamp.to_string()),
        ("tag", "T2".to_string()),
        ("action", id.to_string()),
        ("verdict", verdict.to_string()),
        ("failed", failed),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn policy() -> PolicyConfig {
        PolicyConfig {
            authorized_scope: set(&["fs.read", "sandbox.exec"]),
            approved_manifest: set(&["sha256:aa"]),
        }
    }

    fn email() -> ActionRecord {
        ActionRecord {
            action_type: ActionType::SendEmail,
            target_class: TargetClass::ExternalNetwork,
            scope: set(&["email.send", "net.external"]),
            content_hash: "sha256:ff".into(),
            session_state: SessionState::Unsupervised,
        }
    }

    fn conforming() -> ActionRecord {
        ActionRecord {
            action_type: ActionType::Other("Compute".into()),
            target_class: TargetClass::Local,
            scope: set(&["fs.read"]),
            content_hash: "sha256:aa".into(),
            session_state: SessionState::Supervised,
        }
    }

    #[test]
    fn email_action_fails_five() {
        let d = evaluate(&email(), &policy());
        assert_eq!(d.verdict, PolicyVerdict::Unsafe);
        use ConstraintId::*;
        assert_eq!(d.failed, vec![C1, C2, C4, C5, C6]);
    }

    #[test]
    fn conforming_action_is_safe() {
        let d = evaluate(&conforming(), &policy());
        assert_eq!(d.verdict, PolicyVerdict::Safe);
        assert!(d.failed.is_empty());
    }

    #[test]
    fn hash_alone_fails_c5() {
        let mut a = conforming();
        a.content_hash = "sha256:00".into();
        assert_eq!(evaluate(&a, &policy()).failed, vec![ConstraintId::C5]);
    }

    #[test]
    fn public_post_fails_c1_and_c3() {
        let mut a = conforming();
        a.action_type = ActionType::WritePublicEndpoint;
        a.target_class = TargetClass::ExternalNetwork;
        assert_eq!(evaluate(&a, &policy()).failed, vec![ConstraintId::C1, ConstraintId::C3]);
    }

    #[test]
    fn parse_and_log() {
        let acts = parse_actions(
            "# actions\nid=mail type=SendEmail target=ExternalNetwork scope=email.send,net.external hash=sha256:ff session=Unsupervised\n\
             type=Compute target=Local scope=fs.read hash=sha256:aa session=Supervised\n",
        )
        .unwrap();
        assert_eq!(acts[0].0, "mail");
        assert_eq!(acts[0].1, email());
        assert_eq!(acts[1].0, "action-2");
        assert_eq!(acts[1].1, conforming());
        let p = parse_policy("authorized_scope=fs.read\nauthorized_scope=sandbox.exec approved_manifest=sha256:aa\n").unwrap();
        assert_eq!(p, policy());
        let line = log_line("2026-01-01T00:00:00Z", "mail", &evaluate(&acts[0].1, &p));
        assert_eq!(
            line,
            "timestamp=2026-01-01T00:00:00Z tag=T2 action=mail verdict=unsafe failed=C1,C2,C4,C5,C6"
        );
        assert!(parse_actions("type=SendEmail target=Space scope= hash=x session=Supervised").is_err());
        assert!(parse_actions("type=SendEmail target=Local scope=").is_err());
    }

    fn arb_action() -> impl Strategy<Value = ActionRecord> {
        (
            prop_oneof![
                Just(ActionType::SendEmail),
                Just(ActionType::WritePublicEndpoint),
                Just(ActionType::FileWrite),
                Just(ActionType::NetworkConnect),
                Just(ActionType::Other("X".into())),
            ],
            prop_oneof![
                Just(TargetClass::ExternalNetwork),
                Just(TargetClass::InternalNetwork),
                Just(TargetClass::Local)
            ],
            proptest::collection::btree_set("[a-d]", 0..4),
            "[a-c]",
            prop_oneof![Just(SessionState::Supervised), Just(SessionState::Unsupervised)],
        )
            .prop_map(|(action_type, target_class, scope, content_hash, session_state)| ActionRecord {
                action_type,
                target_class,
                scope,
                content_hash,
                session_state,
            })
    }

    fn arb_policy() -> impl Strategy<Value = PolicyConfig> {
        (
            proptest::collection::btree_set("[a-d]", 0..5),
            proptest::collection::btree_set("[a-c]", 0..4),
        )
            .prop_map(|(authorized_scope, approved_manifest)| PolicyConfig {
                authorized_scope,
                approved_manifest,
            })
    }

    proptest! {
        #[test]
        fn narrowing_scope_never_makes_unsafe_safe(a in arb_action(), p in arb_policy(), drop in 0usize..5) {
            let before = evaluate(&a, &p);
            let mut q = p.clone();
            if let Some(c) = q.authorized_scope.iter().nth(drop).cloned() {
                q.authorized_scope.remove(&c);
            }
            let after = evaluate(&a, &q);
            if before.verdict == PolicyVerdict::Unsafe {
                prop_assert_eq!(after.verdict, PolicyVerdict::Unsafe);
            }
            for c in &before.failed {
                prop_assert!(after.failed.contains(c));
            }
        }

        #[test]
        fn failed_list_is_ordered_and_consistent(a in arb_action(), p in arb_policy()) {
            let d = evaluate(&a, &p);
            prop_assert!(d.failed.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(d.failed.is_empty(), d.verdict == PolicyVerdict::Safe);
            prop_assert_eq!(d.clone(), evaluate(&a, &p));
        }
    }
}
