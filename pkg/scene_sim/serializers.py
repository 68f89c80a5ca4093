"""
Serializers for scene files.
"""
from rest_framework import serializers


class EchoSerializer(serializers.Serializer):
    delay_s = serializers.FloatField(min_value=0.0)
    gain = serializers.FloatField()


class SourceSerializer(serializers.Serializer):
    position = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3)
    signal_kind = serializers.ChoiceField(choices=['sine', 'white_noise', 'sample'], default='white_noise')
    level = serializers.FloatField(default=1.0, min_value=0.0)
    frequency = serializers.FloatField(required=False, allow_null=True, min_value=0.0)
    sample_file = serializers.CharField(required=False, allow_null=True, allow_blank=False)
    echoes = EchoSerializer(many=True, required=False, default=list)

    def validate_position(self, value):
        """Sources must be in front of the array plane."""
        if value[2] <= 0:
            raise serializers.ValidationError("Source must be in front of the array (z > 0).")
        return value

    def validate(self, attrs):
        kind = attrs.get('signal_kind')
        if kind == 'sine' and not attrs.get('frequency'):
            raise serializers.ValidationError({'frequency': "Sine sources need a positive frequency."})
        if kind == 'sample' and not attrs.get('sample_file'):
            raise serializers.ValidationError({'sample_file': "Sample sources need a WAV file."})
        return attrs


class FaceSpriteSerializer(serializers.Serializer):
    identity = serializers.CharField(max_length=64)
    position = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    scale = serializers.FloatField(default=1.0, min_value=0.05)
    rotation = serializers.FloatField(default=0.0, min_value=-180.0, max_value=180.0)


class SceneSerializer(serializers.Serializer):
    """Schema for scene files; field names mirror SceneDescription."""
    sources = SourceSerializer(many=True, required=False, default=list)
    snr_db = serializers.FloatField(default=20.0, allow_null=True)
    seed = serializers.IntegerField(default=0, min_value=0)
    face_sprites = FaceSpriteSerializer(many=True, required=False, default=list)
    speed_of_sound = serializers.FloatField(default=343.0, min_value=1.0)
    noise_power = serializers.FloatField(required=False, allow_null=True, min_value=0.0)
