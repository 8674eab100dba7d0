"""
Validation of material configuration blocks.
"""
from rest_framework import serializers

from config.exceptions import MaterialParameterError
from .hardening import ExponentialHardening, PiecewiseLinearHardening
from .laws import PRESETS, ElasticLaw, J2Law


class HardeningSerializer(serializers.Serializer):
    """Either exponential parameters or a (eps_p, s_Y) table."""
    type = serializers.ChoiceField(choices=['exponential', 'table'])
    h0 = serializers.FloatField(required=False, min_value=0.0)
    s1 = serializers.FloatField(required=False)
    s2 = serializers.FloatField(required=False, default=0.0)
    s3 = serializers.FloatField(required=False, default=0.0)
    table = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2),
        required=False,
        help_text='Rows of [equivalent plastic strain, yield stress in MPa]',
    )

    def validate(self, attrs):
        if attrs['type'] == 'exponential':
            missing = [name for name in ('h0', 's1') if name not in attrs]
            if missing:
                raise serializers.ValidationError(f'exponential hardening needs {", ".join(missing)}.')
        elif not attrs.get('table'):
            raise serializers.ValidationError('table hardening needs a non-empty table.')
        return attrs


class MaterialSerializer(serializers.Serializer):
    """Serializer for one constituent: law tag, elastic constants, density and hardening."""
    law = serializers.ChoiceField(choices=['elastic', 'j2'])
    E = serializers.FloatField(min_value=0.0)
    nu = serializers.FloatField(min_value=-1.0, max_value=0.5)
    density = serializers.FloatField(min_value=0.0, default=0.0, help_text='tonne/mm^3')
    hardening = HardeningSerializer(required=False)

    def validate(self, attrs):
        if attrs['law'] == 'j2' and 'hardening' not in attrs:
            raise serializers.ValidationError('j2 law needs a hardening block.')
        return attrs


class MaterialsSerializer(serializers.Serializer):
    """Fiber and matrix blocks, or a named preset."""
    preset = serializers.ChoiceField(choices=sorted(PRESETS), required=False)
    fiber = MaterialSerializer(required=False)
    matrix = MaterialSerializer(required=False)

    def validate(self, attrs):
        if 'preset' not in attrs and not ('fiber' in attrs and 'matrix' in attrs):
            raise serializers.ValidationError('give a preset or both fiber and matrix blocks.')
        return attrs


def build_hardening(data: dict):
    if data['type'] == 'exponential':
        return ExponentialHardening(h0=data['h0'], s1=data['s1'], s2=data.get('s2', 0.0), s3=data.get('s3', 0.0))
    return PiecewiseLinearHardening.from_rows(data['table'])


def build_law(data: dict):
    if data['law'] == 'elastic':
        return ElasticLaw(E=data['E'], nu=data['nu'], density=data.get('density', 0.0))
    return J2Law(
        E=data['E'], nu=data['nu'],
        hardening=build_hardening(data['hardening']),
        density=data.get('density', 0.0),
    )


def build_materials(payload: dict):
    """Validate a materials block and return (fiber law, matrix law)."""
    serializer = MaterialsSerializer(data=payload)
    if not serializer.is_valid():
        raise MaterialParameterError(f'invalid materials block: {serializer.errors}')
    data = serializer.validated_data
    if 'preset' in data and 'fiber' not in data:
        fiber, matrix = PRESETS[data['preset']]
        return fiber(), matrix()
    return build_law(data['fiber']), build_law(data['matrix'])
