"""emllm: wearable stress monitoring feeding an empathic chat service.

Pipeline: multi-rate physiological recordings -> labeled windows ->
multi-channel 1D CNN classifier -> streaming monitor with daily stress
summaries -> persona-prompted LLM chat, served over HTTP.
"""

__version__ = "0.1.0"
