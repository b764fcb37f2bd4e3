from lora_phy.models import BasebandSignal, ChirpKind, FrameLayout, ModemConfig
