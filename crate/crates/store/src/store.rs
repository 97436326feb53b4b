use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use rusqlite::{params, Connection, OptionalExtension, Row, TransactionBehavior};
use serde_json::Value;

use crate::clock::{Clock, SystemClock};
use crate::error::{Result, StoreError};
use crate::types::{
    CurationRecord, Decision, Filter, Kind, Metadata, Outcome, ReviewCriteria, Stage, Status, WorkItem,
};

pub const DEFAULT_LEASE_SECS: f64 = 600.0;

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS work_items (
    stage        TEXT NOT NULL,
    id           TEXT NOT NULL,
    kind         TEXT NOT NULL,
    status       TEXT NOT NULL,
    lease_owner  TEXT,
    lease_expiry REAL,
    payload_path TEXT NOT NULL,
    metadata     TEXT NOT NULL DEFAULT '{}',
    attempts     INTEGER NOT NULL DEFAULT 0,
    created_at   REAL NOT NULL,
    updated_at   REAL NOT NULL,
    PRIMARY KEY (stage, id)
);
CREATE INDEX IF NOT EXISTS work_items_claim ON work_items (stage, status, id);
CREATE TABLE IF NOT EXISTS curation (
    seq        INTEGER PRIMARY KEY AUTOINCREMENT,
    track_id   TEXT NOT NULL UNIQUE,
    category   TEXT,
    decision   TEXT NOT NULL,
    criteria   TEXT NOT NULL,
    reviewer   TEXT NOT NULL,
    decided_at REAL NOT NULL
);
PRAGMA user_version = 1;
";

/// Registry of videos, clips and tracks backed by a single SQLite file.
///
/// Every state change runs in an immediate transaction, so many threads or
/// processes can share one file. Each `Store` holds its own connection; open
/// one per process (threads may share it).
pub struct Store {
    conn: Mutex<Connection>,
    clock: Arc<dyn Clock>,
    path: Option<PathBuf>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("path", &self.path).finish()
    }
}

fn item_from_row(row: &Row<'_>) -> rusqlite::Result<(WorkItem, String)> {
    let parse_err = |i: usize, e: StoreError| {
        rusqlite::Error::FromSqlConversionFailure(i, rusqlite::types::Type::Text, Box::new(e))
    };
    let stage: String = row.get("stage")?;
    let kind: String = row.get("kind")?;
    let status: String = row.get("status")?;
    let item = WorkItem {
        id: row.get("id")?,
        stage: stage.parse().map_err(|e| parse_err(0, e))?,
        kind: kind.parse().map_err(|e| parse_err(2, e))?,
        status: status.parse().map_err(|e| parse_err(3, e))?,
        lease_owner: row.get("lease_owner")?,
        lease_expiry: row.get("lease_expiry")?,
        payload_path: row.get("payload_path")?,
        metadata: Metadata::new(),
        attempts: row.get("attempts")?,
        created_at: row.get("created_at")?,
        updated_at: row.get("updated_at")?,
    };
    Ok((item, row.get("metadata")?))
}

fn with_metadata((mut item, meta): (WorkItem, String)) -> Result<WorkItem> {
    item.metadata = serde_json::from_str(&meta)?;
    Ok(item)
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::open_with_clock(path, Arc::new(SystemClock))
    }

    pub fn open_with_clock(path: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let conn = Connection::open(&path)?;
        conn.busy_timeout(Duration::from_secs(30))?;
        // WAL lets readers proceed while a claimer holds the write lock.
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
            clock,
            path: Some(path),
        })
    }

    /// Private in-memory store, for tests that need no persistence.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Result<Self> {
        let conn = Connection::open_in_memory()?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
            clock,
            path: None,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Persists `item` as unprocessed, ignoring any status/lease it carries.
    pub fn enqueue(&self, item: &WorkItem) -> Result<String> {
        let now = self.now();
        let meta = serde_json::to_string(&item.metadata)?;
        let conn = self.conn();
        let res = conn.execute(
            "INSERT INTO work_items (stage, id, kind, status, payload_path, metadata, created_at, updated_at)
             VALUES (?1, ?2, ?3, 'unprocessed', ?4, ?5, ?6, ?6)",
            params![item.stage.as_str(), item.id, item.kind.as_str(), item.payload_path, meta, now],
        );
        match res {
            Ok(_) => Ok(item.id.clone()),
            Err(rusqlite::Error::SqliteFailure(e, _)) if e.code == rusqlite::ErrorCode::ConstraintViolation => {
                Err(StoreError::Duplicate {
                    stage: item.stage,
                    id: item.id.clone(),
                })
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Enqueues unless an item with the same key exists; returns whether it
    /// was inserted.
    pub fn enqueue_if_absent(&self, item: &WorkItem) -> Result<bool> {
        match self.enqueue(item) {
            Ok(_) => Ok(true),
            Err(StoreError::Duplicate { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }

    pub fn get(&self, stage: Stage, id: &str) -> Result<Option<WorkItem>> {
        let conn = self.conn();
        let row = conn
            .query_row(
                "SELECT * FROM work_items WHERE stage = ?1 AND id = ?2",
                params![stage.as_str(), id],
                item_from_row,
            )
            .optional()?;
        row.map(with_metadata).transpose()
    }

    /// Atomically takes one claimable item of `stage`: unprocessed, or
    /// processing with an expired lease. Lowest id first.
    pub fn claim(&self, stage: Stage, worker: &str, lease_secs: f64) -> Result<Option<WorkItem>> {
        let now = self.now();
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let picked: Option<(String, Option<String>)> = tx
            .query_row(
                "SELECT id, lease_owner FROM work_items
                 WHERE stage = ?1 AND (status = 'unprocessed' OR (status = 'processing' AND lease_expiry <= ?2))
                 ORDER BY id LIMIT 1",
                params![stage.as_str(), now],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?;
        let Some((id, previous)) = picked else {
            return Ok(None);
        };
        if let Some(prev) = previous {
            log::warn!("reclaiming {stage}/{id} from {prev} after lease expiry");
        }
        tx.execute(
            "UPDATE work_items SET status = 'processing', lease_owner = ?3, lease_expiry = ?4,
                    attempts = attempts + 1, updated_at = ?5
             WHERE stage = ?1 AND id = ?2",
            params![stage.as_str(), id, worker, now + lease_secs, now],
        )?;
        let item = tx.query_row(
            "SELECT * FROM work_items WHERE stage = ?1 AND id = ?2",
            params![stage.as_str(), id],
            item_from_row,
        )?;
        tx.commit()?;
        with_metadata(item).map(Some)
    }

    fn check_lease(&self, tx: &rusqlite::Transaction<'_>, stage: Stage, id: &str, worker: &str) -> Result<WorkItem> {
        let row = tx
            .query_row(
                "SELECT * FROM work_items WHERE stage = ?1 AND id = ?2",
                params![stage.as_str(), id],
                item_from_row,
            )
            .optional()?;
        let item = with_metadata(row.ok_or_else(|| StoreError::NotFound {
            stage,
            id: id.to_string(),
        })?)?;
        if item.status != Status::Processing {
            return Err(StoreError::WrongStatus {
                stage,
                id: id.to_string(),
                status: item.status,
                expected: Status::Processing,
            });
        }
        if item.lease_owner.as_deref() != Some(worker) {
            return Err(StoreError::NotOwner {
                stage,
                id: id.to_string(),
                owner: item.lease_owner,
                caller: worker.to_string(),
            });
        }
        let expiry = item.lease_expiry.unwrap_or(f64::NEG_INFINITY);
        if self.now() >= expiry {
            return Err(StoreError::LeaseExpired {
                stage,
                id: id.to_string(),
                expiry,
            });
        }
        Ok(item)
    }

    /// Moves a leased item to its terminal status and merges `updates` into
    /// its metadata.
    pub fn finish(&self, stage: Stage, id: &str, worker: &str, outcome: Outcome, updates: Metadata) -> Result<()> {
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let mut item = self.check_lease(&tx, stage, id, worker)?;
        item.metadata.extend(updates);
        tx.execute(
            "UPDATE work_items SET status = ?3, lease_owner = NULL, lease_expiry = NULL,
                    metadata = ?4, updated_at = ?5
             WHERE stage = ?1 AND id = ?2",
            params![
                stage.as_str(),
                id,
                outcome.status().as_str(),
                serde_json::to_string(&item.metadata)?,
                self.now()
            ],
        )?;
        tx.commit()?;
        Ok(())
    }

    /// Pushes the lease of an item the caller still owns further out.
    pub fn renew(&self, stage: Stage, id: &str, worker: &str, lease_secs: f64) -> Result<()> {
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        self.check_lease(&tx, stage, id, worker)?;
        let now = self.now();
        tx.execute(
            "UPDATE work_items SET lease_expiry = ?3, updated_at = ?4 WHERE stage = ?1 AND id = ?2",
            params![stage.as_str(), id, now + lease_secs, now],
        )?;
        tx.commit()?;
        Ok(())
    }

    /// Merges metadata into an item regardless of status.
    pub fn update_metadata(&self, stage: Stage, id: &str, updates: Metadata) -> Result<()> {
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let raw: Option<String> = tx
            .query_row(
                "SELECT metadata FROM work_items WHERE stage = ?1 AND id = ?2",
                params![stage.as_str(), id],
                |r| r.get(0),
            )
            .optional()?;
        let mut meta: Metadata = serde_json::from_str(&raw.ok_or_else(|| StoreError::NotFound {
            stage,
            id: id.to_string(),
        })?)?;
        meta.extend(updates);
        tx.execute(
            "UPDATE work_items SET metadata = ?3, updated_at = ?4 WHERE stage = ?1 AND id = ?2",
            params![stage.as_str(), id, serde_json::to_string(&meta)?, self.now()],
        )?;
        tx.commit()?;
        Ok(())
    }

    /// All items matching `filter`, ordered by id.
    pub fn query(&self, filter: &Filter) -> Result<Vec<WorkItem>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT * FROM work_items
             WHERE (?1 IS NULL OR stage = ?1) AND (?2 IS NULL OR status = ?2) AND (?3 IS NULL OR kind = ?3)
             ORDER BY id, stage",
        )?;
        let rows = stmt.query_map(
            params![
                filter.stage.map(|s| s.as_str()),
                filter.status.map(|s| s.as_str()),
                filter.kind.map(|k| k.as_str())
            ],
            item_from_row,
        )?;
        let mut out = Vec::new();
        for row in rows {
            let item = with_metadata(row?)?;
            if filter.matches(&item) {
                out.push(item);
            }
        }
        Ok(out)
    }

    pub fn count(&self, filter: &Filter) -> Result<usize> {
        Ok(self.query(filter)?.len())
    }

    /// Records a reviewer's decision on a track waiting at the review stage.
    ///
    /// The review item goes straight from unprocessed to its terminal status
    /// inside one transaction; a second decision on the same track fails.
    pub fn decide(
        &self,
        track_id: &str,
        decision: Decision,
        criteria: ReviewCriteria,
        reviewer: &str,
    ) -> Result<CurationRecord> {
        let now = self.now();
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let row = tx
            .query_row(
                "SELECT * FROM work_items WHERE stage = 'review' AND id = ?1",
                params![track_id],
                item_from_row,
            )
            .optional()?;
        let item = with_metadata(row.ok_or_else(|| StoreError::NotFound {
            stage: Stage::Review,
            id: track_id.to_string(),
        })?)?;
        if item.status != Status::Unprocessed {
            return Err(if item.status.is_terminal() {
                StoreError::AlreadyDecided(track_id.to_string())
            } else {
                StoreError::WrongStatus {
                    stage: Stage::Review,
                    id: track_id.to_string(),
                    status: item.status,
                    expected: Status::Unprocessed,
                }
            });
        }
        let status = match decision {
            Decision::Accept => Status::Completed,
            Decision::Reject => Status::Discarded,
        };
        let mut meta = item.metadata.clone();
        meta.insert("curation".into(), Value::String(decision.as_str().into()));
        tx.execute(
            "UPDATE work_items SET status = ?2, metadata = ?3, updated_at = ?4 WHERE stage = 'review' AND id = ?1",
            params![track_id, status.as_str(), serde_json::to_string(&meta)?, now],
        )?;
        let category = item.category().map(str::to_string);
        let inserted = tx.execute(
            "INSERT INTO curation (track_id, category, decision, criteria, reviewer, decided_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![track_id, category, decision.as_str(), serde_json::to_string(&criteria)?, reviewer, now],
        );
        if let Err(rusqlite::Error::SqliteFailure(e, _)) = &inserted {
            if e.code == rusqlite::ErrorCode::ConstraintViolation {
                return Err(StoreError::AlreadyDecided(track_id.to_string()));
            }
        }
        inserted?;
        let seq = tx.last_insert_rowid();
        tx.commit()?;
        Ok(CurationRecord {
            seq,
            track_id: track_id.to_string(),
            category,
            decision,
            criteria,
            reviewer: reviewer.to_string(),
            decided_at: now,
        })
    }

    /// Review decisions in decision order, optionally only one kind.
    pub fn curation(&self, decision: Option<Decision>) -> Result<Vec<CurationRecord>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT seq, track_id, category, decision, criteria, reviewer, decided_at FROM curation
             WHERE (?1 IS NULL OR decision = ?1) ORDER BY seq",
        )?;
        let rows = stmt.query_map(params![decision.map(|d| d.as_str())], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, Option<String>>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
                r.get::<_, String>(5)?,
                r.get::<_, f64>(6)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (seq, track_id, category, decision, criteria, reviewer, decided_at) = row?;
            out.push(CurationRecord {
                seq,
                track_id,
                category,
                decision: decision.parse()?,
                criteria: serde_json::from_str(&criteria)?,
                reviewer,
                decided_at,
            });
        }
        Ok(out)
    }

    /// Item counts per stage and status.
    pub fn stats(&self) -> Result<Vec<(Stage, Status, usize)>> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT stage, status, COUNT(*) FROM work_items GROUP BY stage, status")?;
        let rows = stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, i64>(2)?)))?;
        let mut out = Vec::new();
        for row in rows {
            let (stage, status, n) = row?;
            out.push((stage.parse()?, status.parse()?, n as usize));
        }
        out.sort();
        Ok(out)
    }
}

impl Kind {
    pub fn for_stage(stage: Stage) -> Kind {
        match stage {
            Stage::Collect | Stage::Preprocess => Kind::Video,
            Stage::Track => Kind::Clip,
            Stage::Feature | Stage::Review => Kind::Track,
        }
    }
}
