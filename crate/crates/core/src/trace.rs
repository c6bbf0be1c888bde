//! JSON-lines trace format.
//!
//! One event per line. Private transfers carry their endpoints; public
//! anonymous transactions carry only direction and an opaque token; room
//! visits carry the visitor and phase, never amounts.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::ledger::{AddressToken, Endpoints, PiggyDirection, PublicEvent, RoundTag, Transaction};
use crate::physical::{RoomVisit, VisitPhase};
use crate::Cents;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Private {
        round_tag: RoundTag,
        amount_cents: Cents,
        from: usize,
        to: usize,
    },
    PublicAnonymous {
        round_tag: RoundTag,
        amount_cents: Cents,
        direction: PiggyDirection,
        token: AddressToken,
    },
    RoomVisit {
        visitor: usize,
        phase: VisitPhase,
    },
}

impl From<&Transaction> for TraceLine {
    fn from(tx: &Transaction) -> Self {
        match tx.endpoints {
            Endpoints::Private { from, to } => Self::Private {
                round_tag: tx.round,
                amount_cents: tx.amount,
                from,
                to,
            },
            Endpoints::Public { direction, token } => Self::PublicAnonymous {
                round_tag: tx.round,
                amount_cents: tx.amount,
                direction,
                token,
            },
        }
    }
}

impl From<&PublicEvent> for TraceLine {
    fn from(event: &PublicEvent) -> Self {
        Self::PublicAnonymous {
            round_tag: event.round,
            amount_cents: event.amount,
            direction: event.direction,
            token: event.token,
        }
    }
}

impl From<&RoomVisit> for TraceLine {
    fn from(visit: &RoomVisit) -> Self {
        Self::RoomVisit {
            visitor: visit.visitor,
            phase: visit.phase,
        }
    }
}

pub fn write_jsonl<'a, W, I>(lines: I, mut out: W) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a TraceLine>,
{
    for line in lines {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl<'a, I: IntoIterator<Item = &'a TraceLine>>(lines: I) -> String {
    let mut buf = Vec::new();
    write_jsonl(lines, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TraceLine>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
