int main(void) {
    int i = 0;
    int j;
    while (i < 3) {
        for (j = 0; j < 4; j++) {
        }
        i = i + 1;
        if (i == 2) {
            i = 0;
        }
    }
    return i;
}
