#!/usr/bin/env python3
"""Run the few-shot eval loop against a local gold-echo endpoint, twice.

The first run hits the mock endpoint over HTTP; the second reuses the cache
and must report identical numbers with zero new requests:

    python scripts/run_mock_eval.py --n 30 --test-size 8
"""

import argparse
import json
import sys
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from rebuskit.dataset import SplitSpec, gen_fixtures, make_fixture_lexicon, sample_definitions, split_train_test
from rebuskit.llm import EndpointConfig, LlmClient, ResponseCache, run_eval
from rebuskit.textio import render_gold_generation, render_prompt

from demo_pipeline import build_wordlist


def start_gold_echo_server(puzzles):
    gold_by_rebus = {
        render_prompt(p).rebus_line: render_gold_generation(p) for p in puzzles
    }

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length))
            prompt = payload["messages"][0]["content"]
            rebus = [
                line[len("Rebus: "):]
                for line in prompt.splitlines()
                if line.startswith("Rebus: ")
            ][-1]
            self.server.request_count += 1
            body = json.dumps(
                {"choices": [{"message": {"content": gold_by_rebus[rebus]}}]}
            ).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    server.request_count = 0
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=30)
    parser.add_argument("--test-size", type=int, default=8)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--jobs", type=int, default=4)
    args = parser.parse_args(argv)

    corpus = gen_fixtures(build_wordlist(), args.n, seed=args.seed)
    lexicon = make_fixture_lexicon(corpus, seed=args.seed)
    corpus = sample_definitions(corpus, lexicon, seed=args.seed)
    train, test = split_train_test(corpus, SplitSpec(seed=args.seed, test_size=args.test_size))

    server = start_gold_echo_server(corpus)
    host, port = server.server_address
    endpoint = f"http://{host}:{port}/v1"
    print(f"gold-echo endpoint at {endpoint}")

    with tempfile.TemporaryDirectory() as tmp:
        cache_path = Path(tmp) / "cache.jsonl"
        config = EndpointConfig(endpoint=endpoint, model="gold-echo", backoff=0.0)

        client = LlmClient(config, ResponseCache(cache_path))
        report = run_eval(test, train, client, seed=args.seed, jobs=args.jobs, breakdown=True)
        print(f"\ncold run: {server.request_count} requests")
        print(report.to_table())

        client = LlmClient(config, ResponseCache(cache_path))
        before = server.request_count
        report2 = run_eval(test, train, client, seed=args.seed, jobs=args.jobs, breakdown=True)
        print(f"\nwarm run: {server.request_count - before} new requests (cache {cache_path.name})")
        identical = report2.as_dict() == report.as_dict()
        print(f"reports identical: {identical}")

    server.shutdown()
    server.server_close()
    return 0 if identical else 1


if __name__ == "__main__":
    sys.exit(main())
