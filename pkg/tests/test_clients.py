import http.server
import json
import sys
import threading

import pytest

from textground.clients import (
    AuditRequest,
    FlakyTransport,
    HttpLineTransport,
    InProcessTransport,
    LlmExpandClient,
    MockClipScorer,
    OcrNoise,
    SubprocessLineTransport,
    VlmAuditClient,
    mock_audit_handler,
    mock_expand_handler,
    mock_ocr,
)
from textground.errors import ClientError, ClientTransportError
from textground.synth import make_synthetic_corpus
from textground.targets import dequantize_box


class TestMockAuditor:
    def test_grounded_and_coherent(self, simple_sample):
        response = VlmAuditClient.in_process_mock().audit(AuditRequest.from_sample(simple_sample))
        assert all(response.span_grounded)
        assert response.coherent

    def test_detects_missing_grounding(self, simple_sample):
        import dataclasses

        broken = dataclasses.replace(
            simple_sample, prompt=simple_sample.prompt + ' plus "GHOST TEXT"'
        )
        response = VlmAuditClient.in_process_mock().audit(AuditRequest.from_sample(broken))
        assert not all(response.span_grounded)

    def test_detects_incoherent_box(self, simple_sample):
        import dataclasses

        from textground.geometry import NormBox

        spans = (
            dataclasses.replace(simple_sample.grounded_spans[0], box=NormBox(0, 0, 1, 1)),
        ) + simple_sample.grounded_spans[1:]
        broken = dataclasses.replace(simple_sample, grounded_spans=spans)
        response = VlmAuditClient.in_process_mock().audit(AuditRequest.from_sample(broken))
        assert not response.coherent

    def test_duplicate_span_texts_consume(self, simple_sample):
        payload = AuditRequest.from_sample(simple_sample).to_payload()
        payload["spans"] = [payload["spans"][0], payload["spans"][0]]
        response = mock_audit_handler(payload)
        assert response["span_grounded"] == [True, False]


class TestSubprocessTransport:
    def test_audit_over_stdio(self, simple_sample):
        transport = SubprocessLineTransport(
            [sys.executable, "-m", "textground.clients", "--serve", "mock-auditor"]
        )
        try:
            client = VlmAuditClient(transport)
            response = client.audit(AuditRequest.from_sample(simple_sample))
            assert all(response.span_grounded) and response.coherent
            # a second round trip over the same process
            response2 = client.audit(AuditRequest.from_sample(simple_sample))
            assert response2 == response
        finally:
            transport.close()

    def test_dead_process_raises_transport_error(self):
        transport = SubprocessLineTransport([sys.executable, "-c", "pass"])
        with pytest.raises(ClientTransportError):
            transport.call({"x": 1})
        transport.close()


class _JsonEchoHandler(http.server.BaseHTTPRequestHandler):
    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        response = mock_audit_handler(json.loads(body))
        data = json.dumps(response).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


class TestHttpTransport:
    def test_audit_over_http(self, simple_sample):
        server = http.server.HTTPServer(("127.0.0.1", 0), _JsonEchoHandler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            transport = HttpLineTransport(f"http://127.0.0.1:{server.server_port}/audit")
            response = VlmAuditClient(transport).audit(AuditRequest.from_sample(simple_sample))
            assert response.coherent
        finally:
            server.shutdown()

    def test_unreachable_endpoint(self):
        transport = HttpLineTransport("http://127.0.0.1:9/none", timeout=0.2)
        with pytest.raises(ClientTransportError):
            transport.call({})


class TestFlakyTransport:
    def test_fails_then_recovers(self):
        transport = FlakyTransport(InProcessTransport(lambda p: {"ok": True}), fail_first=1)
        with pytest.raises(ClientTransportError):
            transport.call({})
        assert transport.call({}) == {"ok": True}


class TestMockClipScorer:
    def test_deterministic_and_bounded(self):
        scorer = MockClipScorer()
        a = scorer.score("mem://img", "a prompt")
        assert a == scorer.score("mem://img", "a prompt")
        assert 0.0 <= a <= 1.0
        assert a != scorer.score("mem://img2", "a prompt")

    def test_transport_backed_scorer(self):
        from textground.clients import TransportClipScorer, mock_clip_handler

        scorer = TransportClipScorer(InProcessTransport(mock_clip_handler))
        assert scorer.score("mem://img", "p") == MockClipScorer().score("mem://img", "p")

    def test_transport_scorer_rejects_malformed(self):
        from textground.clients import TransportClipScorer

        scorer = TransportClipScorer(InProcessTransport(lambda p: {"score": "high"}))
        with pytest.raises(ClientError):
            scorer.score("mem://img", "p")


class TestExpander:
    def test_mock_expansion(self):
        client = LlmExpandClient(InProcessTransport(mock_expand_handler))
        queries = client.expand("highway", ["exit sign"], ["suburban road"], ["with red text"])
        assert queries and all(isinstance(q, str) for q in queries)

    def test_malformed_response_rejected(self):
        client = LlmExpandClient(InProcessTransport(lambda p: {"queries": [1, 2]}))
        with pytest.raises(ClientError):
            client.expand("x", ["a"], ["b"], [])


class TestMockOcr:
    def corpus(self):
        return make_synthetic_corpus(5, seed=6)

    def test_zero_noise_is_identity(self):
        for sample in self.corpus():
            hyp = mock_ocr(sample, seed=1)
            assert [w.text for w in hyp.words] == [s.text for s in sample.grounded_spans]
            for word, span in zip(hyp.words, sample.grounded_spans):
                assert word.box == dequantize_box(span.box, sample.width, sample.height)

    def test_full_substitution_changes_every_char(self):
        sample = self.corpus()[0]
        hyp = mock_ocr(sample, OcrNoise(char_sub_rate=1.0), seed=1)
        for word, span in zip(hyp.words, sample.grounded_spans):
            assert len(word.text) == len(span.text)
            assert all(a != b for a, b in zip(word.text, span.text))

    def test_seeded_determinism(self):
        sample = self.corpus()[0]
        noise = OcrNoise(char_sub_rate=0.5, box_jitter_px=10)
        assert mock_ocr(sample, noise, seed=3) == mock_ocr(sample, noise, seed=3)
        assert mock_ocr(sample, noise, seed=3) != mock_ocr(sample, noise, seed=4)

    def test_jitter_stays_inside_image(self):
        for sample in self.corpus():
            hyp = mock_ocr(sample, OcrNoise(box_jitter_px=300), seed=2)
            for word in hyp.words:
                assert 0 <= word.box.x_min < word.box.x_max <= sample.width
                assert 0 <= word.box.y_min < word.box.y_max <= sample.height

    def test_invalid_noise_rejected(self):
        with pytest.raises(ValueError):
            OcrNoise(char_sub_rate=1.5)
