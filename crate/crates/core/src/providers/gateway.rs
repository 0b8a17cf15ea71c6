use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::parse::ParseError;
use super::template::TemplateRegistry;
use super::{CompletionRequest, ProviderError, Purpose, TextProvider};
use crate::seed::derive_seed;

/// Counting semaphore bounding in-flight provider calls.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// One provider call as written to the transcript log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub purpose: Purpose,
    pub attempt: u32,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub system: String,
    pub user: String,
    pub response: Option<String>,
    pub error: Option<String>,
    pub parse_error: Option<String>,
    pub latency_ms: u64,
}

/// Shared entry point for every text-model call: renders nothing itself, but
/// enforces the in-flight cap, the re-ask budget and transcript logging.
pub struct Gateway {
    provider: Arc<dyn TextProvider>,
    templates: TemplateRegistry,
    retry_budget: u32,
    max_parallel: usize,
    permits: Permits,
    transcript: Option<Mutex<Box<dyn Write + Send>>>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn TextProvider>, retry_budget: u32, max_parallel: usize) -> Self {
        let max_parallel = max_parallel.max(1);
        Self {
            provider,
            templates: TemplateRegistry::builtin(),
            retry_budget,
            max_parallel,
            permits: Permits::new(max_parallel),
            transcript: None,
        }
    }

    pub fn with_templates(mut self, templates: TemplateRegistry) -> Self {
        self.templates = templates;
        self
    }

    /// Appends one JSON line per provider call to `sink`.
    pub fn with_transcript(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.transcript = Some(Mutex::new(sink));
        self
    }

    pub fn templates(&self) -> &TemplateRegistry {
        &self.templates
    }

    pub fn max_parallel(&self) -> usize {
        self.max_parallel
    }

    pub fn retry_budget(&self) -> u32 {
        self.retry_budget
    }

    fn log(&self, record: TranscriptRecord) {
        if let Some(sink) = &self.transcript {
            let line = serde_json::to_string(&record).expect("transcript record serializes");
            let mut sink = sink.lock().unwrap();
            if let Err(e) = writeln!(sink, "{line}") {
                log::warn!("failed to write transcript: {e}");
            }
        }
    }

    fn attempt(&self, request: &CompletionRequest) -> (Result<String, ProviderError>, u64) {
        let _permit = self.permits.acquire();
        let started = Instant::now();
        let result = self.provider.complete(request);
        (result, started.elapsed().as_millis() as u64)
    }

    fn record(
        &self,
        request: &CompletionRequest,
        attempt: u32,
        latency_ms: u64,
        response: Option<&str>,
        error: Option<String>,
        parse_error: Option<String>,
    ) {
        if self.transcript.is_none() {
            return;
        }
        self.log(TranscriptRecord {
            purpose: request.purpose,
            attempt,
            temperature: request.temperature,
            seed: request.seed,
            system: request.system.clone(),
            user: request.user.clone(),
            response: response.map(str::to_string),
            error,
            parse_error,
            latency_ms,
        });
    }

    /// Sends a request and parses the reply. Transient transport errors and
    /// unparseable replies are re-asked up to the retry budget; each re-ask
    /// re-queries the provider with a derived seed.
    pub fn call_parsed<R>(
        &self,
        request: &CompletionRequest,
        parse: impl Fn(&str) -> Result<R, ParseError>,
    ) -> Result<R, ProviderError> {
        let attempts = self.retry_budget + 1;
        let mut last = None;
        for attempt in 0..attempts {
            let mut req = request.clone();
            if attempt > 0 {
                req.seed = Some(derive_seed(request.seed.unwrap_or(0), "reask", u64::from(attempt)));
            }
            let (result, latency) = self.attempt(&req);
            match result {
                Ok(text) => match parse(&text) {
                    Ok(value) => {
                        self.record(&req, attempt, latency, Some(&text), None, None);
                        return Ok(value);
                    }
                    Err(e) => {
                        self.record(&req, attempt, latency, Some(&text), None, Some(e.to_string()));
                        last = Some(ProviderError::Parse {
                            purpose: request.purpose,
                            attempts: attempt + 1,
                            source: e,
                        });
                    }
                },
                Err(e) => {
                    self.record(&req, attempt, latency, None, Some(e.to_string()), None);
                    if !e.is_transient() {
                        return Err(e);
                    }
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Sends a request whose reply only needs to be non-empty.
    pub fn call(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        self.call_parsed(request, |text| {
            if text.trim().is_empty() {
                Err(ParseError::EmptyInput)
            } else {
                Ok(text.to_string())
            }
        })
    }

    /// Applies `f` to every item on up to `max_parallel` worker threads.
    /// Results come back in input order.
    pub fn fan_out<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        let workers = self.max_parallel.min(items.len());
        if workers <= 1 {
            return items.iter().map(&f).collect();
        }
        let next = AtomicUsize::new(0);
        let mut slots: Vec<Option<R>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    scope.spawn(|| {
                        let mut done = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= items.len() {
                                break;
                            }
                            done.push((i, f(&items[i])));
                        }
                        done
                    })
                })
                .collect();
            let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
            for h in handles {
                for (i, r) in h.join().expect("fan-out worker panicked") {
                    slots[i] = Some(r);
                }
            }
            slots
        });
        slots.iter_mut().map(|s| s.take().expect("every item processed")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::parse::{parse_tagged_scalar, ScalarRange};
    use crate::providers::RenderedPrompt;
    use std::sync::atomic::AtomicU32;

    struct Flaky {
        calls: AtomicU32,
        replies: Vec<Result<String, ProviderError>>,
    }

    impl TextProvider for Flaky {
        fn complete(&self, _r: &CompletionRequest) -> Result<String, ProviderError> {
            let i = self.calls.fetch_add(1, Ordering::SeqCst) as usize;
            self.replies[i.min(self.replies.len() - 1)].clone()
        }
    }

    fn req() -> CompletionRequest {
        CompletionRequest::new(
            Purpose::Novelty,
            RenderedPrompt {
                system: String::new(),
                user: "u".into(),
            },
            0.0,
        )
    }

    fn unit(text: &str) -> Result<f64, ParseError> {
        parse_tagged_scalar(text, "novelty", ScalarRange::UNIT, true)
    }

    #[test]
    fn reasks_until_parse_succeeds() {
        let p = Arc::new(Flaky {
            calls: AtomicU32::new(0),
            replies: vec![
                Ok("garbage".into()),
                Err(ProviderError::Transport("reset".into())),
                Ok("<novelty>0.4</novelty>".into()),
            ],
        });
        let g = Gateway::new(p.clone(), 2, 1);
        assert_eq!(g.call_parsed(&req(), unit).unwrap(), 0.4);
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn parse_errors_bounded_by_budget() {
        let p = Arc::new(Flaky {
            calls: AtomicU32::new(0),
            replies: vec![Ok("same bad text".into())],
        });
        let g = Gateway::new(p.clone(), 3, 1);
        let err = g.call_parsed(&req(), unit).unwrap_err();
        assert!(matches!(err, ProviderError::Parse { attempts: 4, .. }));
        assert_eq!(p.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn permanent_errors_not_retried() {
        let p = Arc::new(Flaky {
            calls: AtomicU32::new(0),
            replies: vec![Err(ProviderError::ScriptExhausted)],
        });
        let g = Gateway::new(p.clone(), 5, 1);
        assert_eq!(g.call(&req()), Err(ProviderError::ScriptExhausted));
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
    }

    struct Counting {
        live: AtomicUsize,
        peak: AtomicUsize,
    }

    impl TextProvider for Counting {
        fn complete(&self, _r: &CompletionRequest) -> Result<String, ProviderError> {
            let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(5));
            self.live.fetch_sub(1, Ordering::SeqCst);
            Ok("ok".into())
        }
    }

    #[test]
    fn fan_out_preserves_order_and_cap() {
        let p = Arc::new(Counting {
            live: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let g = Gateway::new(p.clone(), 0, 3);
        let items: Vec<usize> = (0..24).collect();
        // Nested fan-out still respects the global cap.
        let out = g.fan_out(&items, |&i| {
            g.fan_out(&[0, 1], |_| g.call(&req()).unwrap());
            i * 2
        });
        assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
        assert!(p.peak.load(Ordering::SeqCst) <= 3);
    }

    #[test]
    fn transcript_lines_written() {
        #[derive(Clone)]
        struct Shared(Arc<Mutex<Vec<u8>>>);
        impl Write for Shared {
            fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(b);
                Ok(b.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let buf = Shared(Arc::new(Mutex::new(Vec::new())));
        let p = Arc::new(Flaky {
            calls: AtomicU32::new(0),
            replies: vec![Ok("bad".into()), Ok("<novelty>1</novelty>".into())],
        });
        let g = Gateway::new(p, 1, 1).with_transcript(Box::new(buf.clone()));
        g.call_parsed(&req(), unit).unwrap();
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        let lines: Vec<TranscriptRecord> =
            text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].parse_error.is_some());
        assert_eq!(lines[1].response.as_deref(), Some("<novelty>1</novelty>"));
    }
}
