import init, { scan_paths, match_message, search_queries } from "./pkg/agentscan_web.js";

const $ = (id) => document.getElementById(id);

function esc(s) {
  return String(s).replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]);
}

function table(headers, rows) {
  if (rows.length === 0) return '<p class="muted">No matches.</p>';
  const head = headers.map((h) => `<th>${esc(h)}</th>`).join("");
  const body = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

function parse(json, out) {
  const v = JSON.parse(json);
  if (v && v.error) {
    out.innerHTML = `<p class="err">${esc(v.error)}</p>`;
    return null;
  }
  return v;
}

function runScan() {
  const out = $("scan-out");
  const v = parse(scan_paths($("paths").value, $("gitignore").value, $("as-of").value), out);
  if (!v) return;
  let html = table(
    ["agent", "rule", "path"],
    v.evidence.map((e) => [esc(e.agent), `<code>${esc(e.rule)}</code>`, `<code>${esc(e.path)}</code>`]),
  );
  if (v.ignored_paths.length) {
    html += `<p class="warn">Ignored by .gitignore: ${v.ignored_paths.map((p) => `<code>${esc(p)}</code>`).join(", ")}</p>`;
  }
  if (v.ignored_agent_rules.length) {
    html += `<p class="warn">Agent files hidden from the repository: ${v.ignored_agent_rules.map((r) => `<code>${esc(r)}</code>`).join(", ")}</p>`;
  }
  for (const d of v.ignore_diagnostics) {
    html += `<p class="muted">.gitignore line ${d.line}: ${esc(d.message)}</p>`;
  }
  out.innerHTML = html;
}

function runMatch() {
  const out = $("match-out");
  const v = parse(
    match_message($("message").value, $("author-name").value, $("author-email").value, $("as-of").value, $("lax").checked),
    out,
  );
  if (!v) return;
  const trailers = v.trailers.length
    ? `<p class="muted">Trailers: ${v.trailers.map((t) => `<code>${esc(t.key)}: ${esc(t.value)}</code>`).join(", ")}</p>`
    : '<p class="muted">No trailer block.</p>';
  out.innerHTML =
    trailers +
    table(
      ["agent", "rule", "category"],
      v.evidence.map((e) => [esc(e.agent), `<code>${esc(e.rule)}</code>`, esc(e.category)]),
    );
}

function runQueries() {
  const out = $("queries-out");
  const v = parse(search_queries($("filter").value), out);
  if (!v) return;
  out.innerHTML = table(
    ["agent", "rule", "query"],
    v.map((q) => [esc(q.agent), `<code>${esc(q.rule)}</code>`, `<a href="${esc(q.url)}" target="_blank" rel="noopener"><code>${esc(q.query)}</code></a>`]),
  );
}

await init();
$("scan").addEventListener("click", runScan);
$("match").addEventListener("click", runMatch);
$("queries").addEventListener("click", runQueries);
runScan();
runMatch();
runQueries();
