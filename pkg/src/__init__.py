"""Project source package (src).

Лаборатория непараметрических тестов согласия: модель последовательностей,
квадратичные, ядерные, хи-квадрат и КфМ-тесты, классификация альтернатив
и харнесс Монте-Карло. Запуск: `python -m src <команда>`.
"""
