//! Container backend speaking the engine HTTP API over its Unix socket.

use std::path::Path;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde_json::{json, Value};

use super::http_unix::{Response, UnixHttp};
use super::{ExecOptions, ExecResult, Runtime, Sandbox, SandboxError, SandboxSpec, TIMEOUT_EXIT, VENV, WORKDIR};

const MIRROR: &str = "/mirror";
const API_TIMEOUT: Duration = Duration::from_secs(120);

pub struct DockerRuntime {
    http: UnixHttp,
}

fn unavailable(e: impl std::fmt::Display) -> SandboxError {
    SandboxError::RuntimeUnavailable(e.to_string())
}

fn message(resp: &Response) -> String {
    resp.json()
        .ok()
        .and_then(|v| v["message"].as_str().map(str::to_string))
        .unwrap_or_else(|| resp.text())
}

fn query_escape(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

fn container_env() -> Vec<String> {
    vec![
        format!("VIRTUAL_ENV={VENV}"),
        format!("PATH={VENV}/bin:/root/.local/bin:/usr/local/sbin:/usr/local/bin:/usr/sbin:/usr/bin:/sbin:/bin"),
        "LANG=C.UTF-8".into(),
        "PYTHONDONTWRITEBYTECODE=1".into(),
        "PYTHONHASHSEED=0".into(),
        "PIP_DISABLE_PIP_VERSION_CHECK=1".into(),
    ]
}

impl DockerRuntime {
    pub fn connect(socket: &Path) -> Result<DockerRuntime, SandboxError> {
        let http = UnixHttp::new(socket);
        let resp = http
            .request("GET", "/_ping", None, Some(Duration::from_secs(10)))
            .map_err(unavailable)?;
        if resp.status != 200 {
            return Err(unavailable(format!("ping returned HTTP {}", resp.status)));
        }
        Ok(DockerRuntime { http })
    }

    fn call(&self, method: &str, path: &str, body: Option<Value>) -> Result<Response, SandboxError> {
        self.http
            .request(method, path, body.as_ref(), Some(API_TIMEOUT))
            .map_err(unavailable)
    }

    fn start_container(
        &self,
        image: &str,
        spec: &SandboxSpec,
        binds: Vec<String>,
    ) -> Result<DockerSandbox, SandboxError> {
        let body = json!({
            "Image": image,
            "Cmd": ["sleep", "infinity"],
            "WorkingDir": WORKDIR,
            "Env": container_env(),
            "HostConfig": {
                "Binds": binds,
                "NanoCpus": (spec.cpu_limit * 1e9) as i64,
                "Memory": spec.mem_limit_mb * 1024 * 1024,
                "Init": true,
            },
        });
        let resp = self.call("POST", "/containers/create", Some(body))?;
        if resp.status != 201 {
            return Err(unavailable(format!("create from {image}: {}", message(&resp))));
        }
        let id = resp.json().map_err(unavailable)?["Id"]
            .as_str()
            .ok_or_else(|| unavailable("create returned no Id"))?
            .to_string();
        let sandbox = DockerSandbox {
            http: self.http.clone(),
            id,
            network: true,
        };
        let resp = self.call("POST", &format!("/containers/{}/start", sandbox.id), None)?;
        if !matches!(resp.status, 204 | 304) {
            return Err(unavailable(format!("start: {}", message(&resp))));
        }
        Ok(sandbox)
    }
}

impl Runtime for DockerRuntime {
    fn create(&self, spec: &SandboxSpec, source: &str, commit: &str) -> Result<Box<dyn Sandbox>, SandboxError> {
        let local = Path::new(source);
        let (binds, clone_from) = if local.exists() {
            let abs = local.canonicalize()?;
            (vec![format!("{}:{MIRROR}:ro", abs.display())], MIRROR.to_string())
        } else {
            (Vec::new(), source.to_string())
        };
        let mut sb = self.start_container(&spec.base_image, spec, binds)?;
        let opts = ExecOptions {
            timeout: spec.install_timeout,
            network: true,
        };
        let clone = sb.exec(
            &format!("git clone -q {clone_from} {WORKDIR} && git -c advice.detachedHead=false checkout -q {commit}"),
            opts,
        )?;
        if !clone.success() {
            return Err(SandboxError::CloneError(clone.output.trim().to_string()));
        }
        let py = &spec.python_version;
        let venv = sb.exec(
            &format!("uv venv -q --seed --python {py} {VENV} && python --version"),
            opts,
        )?;
        if !venv.success() || !venv.output.contains(&format!("Python {py}")) {
            return Err(SandboxError::InterpreterUnavailable(format!(
                "{py}: {}",
                venv.output.trim()
            )));
        }
        Ok(Box::new(sb))
    }

    fn restore(&self, image: &str, spec: &SandboxSpec) -> Result<Box<dyn Sandbox>, SandboxError> {
        if !self.image_exists(image) {
            return Err(unavailable(format!("no such image: {image}")));
        }
        Ok(Box::new(self.start_container(image, spec, Vec::new())?))
    }

    fn image_exists(&self, image: &str) -> bool {
        self.call("GET", &format!("/images/{image}/json"), None)
            .is_ok_and(|r| r.status == 200)
    }
}

pub struct DockerSandbox {
    http: UnixHttp,
    id: String,
    network: bool,
}

impl DockerSandbox {
    fn call(&self, method: &str, path: &str, body: Option<Value>, timeout: Duration) -> Result<Response, SandboxError> {
        self.http
            .request(method, path, body.as_ref(), Some(timeout))
            .map_err(|e| SandboxError::SandboxDead(format!("{}: {e}", self.id)))
    }

    fn set_network(&mut self, enabled: bool) -> Result<(), SandboxError> {
        if self.network == enabled {
            return Ok(());
        }
        let action = if enabled { "connect" } else { "disconnect" };
        let body = if enabled {
            json!({"Container": self.id})
        } else {
            json!({"Container": self.id, "Force": true})
        };
        let resp = self.call("POST", &format!("/networks/bridge/{action}"), Some(body), API_TIMEOUT)?;
        if resp.status != 200 {
            return Err(unavailable(format!("network {action}: {}", message(&resp))));
        }
        self.network = enabled;
        Ok(())
    }
}

impl Sandbox for DockerSandbox {
    fn id(&self) -> &str {
        &self.id
    }

    fn exec(&mut self, command: &str, opts: ExecOptions) -> Result<ExecResult, SandboxError> {
        self.set_network(opts.network)?;
        let secs = opts.timeout.as_secs().max(1).to_string();
        let body = json!({
            "AttachStdout": true,
            "AttachStderr": true,
            "Tty": true,
            "WorkingDir": WORKDIR,
            "Cmd": ["timeout", "-k", "10", secs, "bash", "-lc", command],
        });
        let resp = self.call(
            "POST",
            &format!("/containers/{}/exec", self.id),
            Some(body),
            API_TIMEOUT,
        )?;
        if resp.status != 201 {
            return Err(SandboxError::SandboxDead(format!("{}: {}", self.id, message(&resp))));
        }
        let exec_id = resp.json()?["Id"].as_str().unwrap_or_default().to_string();
        let start = Instant::now();
        let out = self.call(
            "POST",
            &format!("/exec/{exec_id}/start"),
            Some(json!({"Detach": false, "Tty": true})),
            opts.timeout + Duration::from_secs(60),
        )?;
        let duration_secs = start.elapsed().as_secs_f64();
        let info = self
            .call("GET", &format!("/exec/{exec_id}/json"), None, API_TIMEOUT)?
            .json()?;
        let raw = info["ExitCode"].as_i64().unwrap_or(-1) as i32;
        let timed_out = (raw == TIMEOUT_EXIT || raw == 137) && duration_secs >= opts.timeout.as_secs_f64();
        Ok(ExecResult {
            command: command.to_string(),
            exit_code: if timed_out { TIMEOUT_EXIT } else { raw },
            output: out.text().replace("\r\n", "\n"),
            duration_secs,
            timed_out,
        })
    }

    fn write_file(&mut self, path: &str, contents: &[u8]) -> Result<(), SandboxError> {
        let target = if path.starts_with('/') {
            path.to_string()
        } else {
            format!("{WORKDIR}/{path}")
        };
        let encoded = base64::engine::general_purpose::STANDARD.encode(contents);
        let opts = ExecOptions {
            timeout: Duration::from_secs(60),
            network: self.network,
        };
        let parent = Path::new(&target)
            .parent()
            .map_or("/".into(), |p| p.display().to_string());
        let init = self.exec(&format!("mkdir -p '{parent}' && : > '{target}.b64'"), opts)?;
        if !init.success() {
            return Err(SandboxError::Io(std::io::Error::other(init.output)));
        }
        for chunk in encoded.as_bytes().chunks(96 * 1024) {
            let chunk = std::str::from_utf8(chunk).unwrap_or_default();
            self.exec(&format!("printf '%s' '{chunk}' >> '{target}.b64'"), opts)?;
        }
        let fin = self.exec(
            &format!("base64 -d '{target}.b64' > '{target}' && rm '{target}.b64'"),
            opts,
        )?;
        if !fin.success() {
            return Err(SandboxError::Io(std::io::Error::other(fin.output)));
        }
        Ok(())
    }

    fn snapshot(&mut self, tag: &str) -> Result<String, SandboxError> {
        let (repo, version) = match tag.rsplit_once(':') {
            Some((r, v)) if !v.contains('/') => (r, v),
            _ => (tag, "latest"),
        };
        let path = format!(
            "/commit?container={}&repo={}&tag={}",
            self.id,
            query_escape(repo),
            query_escape(version)
        );
        let resp = self.call("POST", &path, Some(json!({})), Duration::from_secs(1800))?;
        if resp.status != 201 {
            return Err(unavailable(format!("commit: {}", message(&resp))));
        }
        Ok(format!("{repo}:{version}"))
    }
}

impl Drop for DockerSandbox {
    fn drop(&mut self) {
        let _ = self.http.request(
            "DELETE",
            &format!("/containers/{}?force=true", self.id),
            None,
            Some(API_TIMEOUT),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_query_values() {
        assert_eq!(
            query_escape("localhost/toy/setupagent-calc"),
            "localhost%2Ftoy%2Fsetupagent-calc"
        );
        assert!(DockerRuntime::connect(Path::new("/nonexistent/docker.sock")).is_err());
    }
}
