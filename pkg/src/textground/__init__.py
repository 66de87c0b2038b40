"""Toolkit for layout-aware, prompt-grounded text rendering data and evaluation.

Submodules:
  geometry   box types, record types, exact rectangle operations
  spans      quoted-span extraction and text normalization
  align      multistage span-to-OCR alignment
  targets    box quantization and training-target token sequences
  filters    three-stage corpus quality filtering
  stratify   difficulty classification and benchmark manifests
  metrics    the evaluation suite (Acc / F1 / CER / Layout IoU / PC)
  toy_model  tiny autoregressive model verifying the segmented objective
  corpus     line-delimited corpus files with manifest sidecars
  clients    external-service client transports and in-process mocks
  mining     query taxonomy, template generation, lexical retrieval
  pipeline   end-to-end orchestration
  synth      synthetic corpus generation for tests and demos
"""

__version__ = "0.1.0"
